"""Small 10-fold cross-validation run with a seed-fixed fold plan.

Two variants share the identical fold assignment (it depends only on the
seed), so their per-fold accuracies are directly comparable.

Run: python3 demos/cross_validation.py   (about half a minute)
"""

import numpy as np

from sentconv import corpus, embed, evaluate, optim

rng = np.random.default_rng(1)
fillers = [f"f{i}" for i in range(30)]
pairs = []
for i in range(300):
    sent = list(rng.choice(fillers, int(rng.integers(5, 10))))
    label = i % 2
    sent[int(rng.integers(0, len(sent)))] = "goodish" if label else "dreadful"
    pairs.append((label, " ".join(sent)))

token_lists, labels = corpus.tokenize_corpus(pairs)
vocab = corpus.build_vocabulary(token_lists)

reports = {}
for variant in ("rand", "static"):
    config = optim.TrainConfig(variant=variant, widths=(2, 3), maps_per_width=3,
                               dim=8, keep_prob=0.5, batch_size=10, max_epochs=12,
                               patience=12, seed=11, init_scale=0.1)
    dataset = corpus.encode_corpus(token_lists, labels, vocab, max(config.widths))
    plan = evaluate.cv_fold_plan(len(dataset), config)
    print(f"{variant}: fold sizes {plan.sizes().tolist()}")
    if variant == "rand":
        base, _ = embed.build_base_matrix(vocab, config.dim, "rand", config.seed)
    else:
        base = embed.random_matrix(len(vocab), config.dim, seed=2, a=0.25)
    reports[variant] = evaluate.run_cross_validation(dataset, config, base)

print(f"\n{'fold':>4s} {'rand':>8s} {'static':>8s}")
for fold, (a, b) in enumerate(zip(reports["rand"].accuracies,
                                  reports["static"].accuracies)):
    print(f"{fold:4d} {a:8.3f} {b:8.3f}")
print(f"{'mean':>4s} {reports['rand'].mean:8.3f} {reports['static'].mean:8.3f}")

print("\nCSV serialization of the first report:")
for line in reports["rand"].to_csv().splitlines()[:4]:
    print(f"  {line}")
