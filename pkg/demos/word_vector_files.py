"""Word-vector file handling: binary/text formats, unknown-word initialization.

Run: python3 demos/word_vector_files.py
"""

import io

import numpy as np

from sentconv import corpus, embed

vocab = corpus.build_vocabulary([["cat", "dog", "bird", "axolotl", "quokka"]])

print("== write and re-read the binary format ==")
rng = np.random.default_rng(0)
known_words = ["cat", "dog", "bird"]
known = rng.normal(0, 0.4, (3, 5)).astype(np.float32).astype(np.float64)
blob = io.BytesIO()
embed.write_word2vec_binary(blob, known_words, known)
print(f"  file header: {blob.getvalue()[:4]!r} (vocab count, dimensionality)")

blob.seek(0)
matrix, matched = embed.parse_word2vec_binary(blob, vocab)
print(f"  matched {sorted(matched)}; values recovered exactly:",
      np.array_equal(matrix[vocab.id('cat')], known[0]))

again = io.BytesIO()
embed.write_word2vec_binary(again, known_words,
                            matrix[[vocab.id(w) for w in known_words]])
print("  parse -> write round trip is byte-identical:",
      again.getvalue() == blob.getvalue())

print("\n== variance-matched initialization of unknown words ==")
pooled = matrix[[vocab.id(w) for w in known_words]].var()
unknown_ids = [vocab.id("axolotl"), vocab.id("quokka")]
a = embed.variance_matched_init(matrix, [vocab.id(w) for w in known_words],
                                unknown_ids, seed=1)
print(f"  pooled variance of matched entries: {pooled:.5f}")
print(f"  chosen half-width a = sqrt(3 v) = {a:.5f}; a^2/3 = {a * a / 3:.5f}")
print(f"  axolotl row now nonzero: {np.any(matrix[vocab.id('axolotl')] != 0)}")

print("\n== channel assembly per model variant ==")
for variant in embed.VARIANTS:
    if variant == "rand":
        base = embed.random_matrix(len(vocab), 5, seed=2)
    else:
        base = matrix
    channels = embed.assemble_channels(variant, base)
    flags = [ch.trainable for ch in channels]
    print(f"  {variant:13s} -> {len(channels)} channel(s), trainable={flags}")

print("\n== the plain-text variant ==")
text_blob = io.BytesIO()
embed.write_word2vec_text(text_blob, ["cat", "dog"], known[:2])
print("  " + text_blob.getvalue().decode().splitlines()[0][:60] + " ...")
