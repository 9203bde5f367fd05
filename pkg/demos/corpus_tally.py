"""Run every bundled corpus case and print the per-case verdict table.

    python3 demos/corpus_tally.py
"""

from enforcekit.sim import run_corpus


def main() -> None:
    print(run_corpus(workers=4).to_text())
    off = run_corpus(enforcement=False)
    print("without enforcement:", dict(off.counts))


if __name__ == "__main__":
    main()
