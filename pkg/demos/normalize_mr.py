"""Convert the sentence-polarity movie-review download to the TSV format.

The archive (rt-polaritydata.tar.gz) contains rt-polarity.pos and
rt-polarity.neg, one latin-1 sentence per line.  This writes the combined
`<label><TAB><sentence>` file the CLI and the extended acceptance checks
expect (positives first, label 1; negatives label 0).

Usage: python3 demos/normalize_mr.py <rt-polarity.pos> <rt-polarity.neg> <out.tsv>
"""

import sys


def main():
    if len(sys.argv) != 4:
        sys.stderr.write(__doc__)
        return 1
    pos_path, neg_path, out_path = sys.argv[1:]
    n = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for label, path in ((1, pos_path), (0, neg_path)):
            with open(path, encoding="latin-1") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        out.write(f"{label}\t{line}\n")
                        n += 1
    print(f"wrote {n} examples to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
