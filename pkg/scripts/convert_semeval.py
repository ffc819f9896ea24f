"""Convert SemEval-2016 Task 3 Subtask B XML into the JSONL dataset format.

    python scripts/convert_semeval.py --xml SemEval2016-Task3-CQA-QL-test.xml \
        --split test --out data/ [--mt-tsv mt_test.tsv]

Writes ``en_<split>.jsonl`` and, when a translation file is given,
``mt_<split>.jsonl`` with the same candidates and judgments. The translation
file has one ``query_id<TAB>translated text`` per line.
"""

import argparse
from pathlib import Path

from qerank.ingestion import convert_semeval_xml, read_mt_tsv, write_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--xml", required=True, type=Path)
    ap.add_argument("--split", required=True, choices=["dev", "test"])
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--mt-tsv", type=Path)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    en = convert_semeval_xml(args.xml, "EN")
    write_dataset(en, args.out / f"en_{args.split}.jsonl")
    print(f"{len(en)} EN queries -> {args.out / f'en_{args.split}.jsonl'}")
    if args.mt_tsv:
        mt = convert_semeval_xml(args.xml, "MT", read_mt_tsv(args.mt_tsv))
        write_dataset(mt, args.out / f"mt_{args.split}.jsonl")
        print(f"{len(mt)} MT queries -> {args.out / f'mt_{args.split}.jsonl'}")


if __name__ == "__main__":
    main()
