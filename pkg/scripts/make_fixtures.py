"""Regenerate the small synthetic corpus and resources under tests/fixtures/.

The corpus mimics a community-forum re-ranking set: every new question has
ten candidate questions, a few on the same topic (relevant) and the rest
drawn from other topics. MT queries are the EN queries with some words
swapped for near-synonyms, the way a translation system drifts.

    python scripts/make_fixtures.py [outdir]
"""

import json
import random
import sys
from pathlib import Path

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests" / "fixtures"

TRAVEL_QUERY = (
    "Im likely to travel in the month of june... just wanna know some good places to visit...."
)

TOPICS = {
    "travel": ["travel", "trips", "travelers", "tourism", "holiday", "vacation", "places", "visit", "tour", "beach"],
    "visa": ["visa", "sponsor", "permit", "residence", "renew", "immigration", "passport", "exit"],
    "job": ["job", "salary", "work", "employer", "contract", "hire", "interview", "career"],
    "car": ["car", "driving", "license", "vehicle", "traffic", "test", "roundabout", "petrol"],
    "school": ["school", "kids", "children", "education", "fees", "teacher", "admission", "nursery"],
    "food": ["restaurant", "food", "dinner", "eat", "cuisine", "lunch", "buffet", "cafe"],
}

# MT drift: EN word -> what the translation produced instead
MT_SWAPS = {
    "travel": "journey",
    "visa": "permission",
    "job": "employment",
    "car": "automobile",
    "school": "academy",
    "restaurant": "eatery",
    "salary": "wage",
    "kids": "boys",
    "license": "licence",
    "places": "locations",
}

FILLER = ["please", "anyone", "know", "good", "best", "where", "how", "help", "need", "thanks",
          "doha", "qatar", "month", "week", "new", "any", "advice", "here"]

SENTENCES = ["Hi all", "Any advice?", "Thanks in advance!!", "Please help...", "Cheers."]


def make_embeddings(rng: random.Random) -> list[tuple[str, list[float]]]:
    centers = {}
    for i, topic in enumerate(TOPICS):
        c = [0.1] * 5
        c[i % 5] = 1.0
        if i >= 5:
            c = [0.6, 0.6, 0.1, 0.1, 0.4]
        centers[topic] = c
    rows = []
    # pinned neighbourhood for the travel example: travelers and trips closest
    rows.append(("travel", [0.9, 0.15, 0.1, 0.1, 0.1]))
    rows.append(("travelers", [0.88, 0.17, 0.1, 0.12, 0.1]))
    rows.append(("trips", [0.9, 0.12, 0.13, 0.1, 0.12]))
    rows.append(("journey", [0.85, 0.2, 0.12, 0.1, 0.15]))
    for topic, words in TOPICS.items():
        for w in words:
            if any(w == r[0] for r in rows):
                continue
            rows.append((w, [round(x + rng.uniform(-0.25, 0.25), 4) for x in centers[topic]]))
    for en, mt in MT_SWAPS.items():
        if any(mt == r[0] for r in rows):
            continue
        topic = next(t for t, ws in TOPICS.items() if en in ws)
        rows.append((mt, [round(x + rng.uniform(-0.15, 0.15), 4) for x in centers[topic]]))
    for w in FILLER + ["june", "month", "likely", "wanna", "just", "some"]:
        if any(w == r[0] for r in rows):
            continue
        rows.append((w, [round(rng.uniform(-0.5, 0.5), 4) for _ in range(5)]))
    # punctuation and stopword entries, as in real distributions
    rows.append((",", [0.9, 0.15, 0.1, 0.1, 0.11]))
    rows.append(("the", [0.9, 0.14, 0.11, 0.1, 0.1]))
    return rows


def sentence(rng: random.Random, topic: str, n_topic: int, swap: float = 0.0) -> str:
    words = rng.sample(TOPICS[topic], n_topic) + rng.sample(FILLER, 3)
    rng.shuffle(words)
    words = [MT_SWAPS.get(w, w) if rng.random() < swap else w for w in words]
    return f"{rng.choice(SENTENCES)} " + " ".join(words) + rng.choice(["?", "...", "!", "."])


def make_split(rng: random.Random, name: str, n_queries: int, start: int):
    topics = list(TOPICS)
    en, mt = [], []
    for qi in range(n_queries):
        qid = f"Q{start + qi}"
        topic = topics[(start + qi) % len(topics)]
        if name == "test" and qi == 0:
            topic, text = "travel", TRAVEL_QUERY
        else:
            text = sentence(rng, topic, 4)
        words = text.split()
        mt_text = " ".join(MT_SWAPS.get(w.lower().strip(".?!"), w) for w in words)
        n_rel = rng.randint(1, 4)
        cands = []
        for ci in range(10):
            if ci < n_rel:
                ctext = sentence(rng, topic, rng.randint(1, 3), swap=0.3)
                rel = rng.choice(["PerfectMatch", "Relevant"])
            else:
                other = rng.choice([t for t in topics if t != topic])
                ctext = sentence(rng, other, 3)
                rel = "Irrelevant"
            cands.append({"text": ctext, "relevance": rel})
        rng.shuffle(cands)
        # ids assigned after shuffling so they carry no relevance signal
        cands = [dict(c, doc_id=f"{qid}_R{ci + 1}") for ci, c in enumerate(cands)]
        en.append({"query_id": qid, "scenario": "EN", "text": text, "candidates": cands})
        mt.append({"query_id": qid, "scenario": "MT", "text": mt_text, "candidates": cands})
    return en, mt


def write_jsonl(path: Path, records) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")


def main() -> None:
    rng = random.Random(20190707)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "embeddings.txt", "w", encoding="utf-8") as fh:
        for w, vec in make_embeddings(rng):
            fh.write(w + " " + " ".join(f"{x:.4f}" for x in vec) + "\n")

    kb = {
        "travel": ["Tourism", "Tourist activities", "Transport culture"],
        "june": ["Months"],
        "visa": ["Category:Travel documents", "Immigration law"],
        "job": ["Employment"],
        "car": ["Cars", "Road transport"],
        "school": ["Schools", "Education"],
        "restaurant": ["Restaurants", "Food and drink"],
        "salary": ["Employment compensation"],
    }
    write_jsonl(
        OUT / "kb_cache.jsonl",
        [{"key": k, "subjects": v, "fetched_at": "2019-07-07T00:00:00+00:00"} for k, v in sorted(kb.items())],
    )

    hyp = [
        ("hyponym_label", "hypernym_word", "confidence"),
        ("operating expense", "travel", "0.82"),
        ("related expense", "travel", "0.79"),
        ("personal expense", "travel", "0.75"),
        ("business trip", "travel", "0.6"),
        ("work permit", "visa", "0.91"),
        ("tourist visa", "visa", "0.88"),
        ("bonus", "salary", "0.8"),
        ("sedan", "car", "0.86"),
        ("suv", "car", "0.77"),
        ("kindergarten", "school", "0.9"),
        ("fast food", "restaurant", "0.7"),
        ("full time job", "job", "0.83"),
    ]
    (OUT / "hypernyms.tsv").write_text("".join("\t".join(r) + "\n" for r in hyp), encoding="utf-8")

    dev_en, dev_mt = make_split(rng, "dev", 4, 100)
    test_en, test_mt = make_split(rng, "test", 6, 1)
    write_jsonl(OUT / "en_dev.jsonl", dev_en)
    write_jsonl(OUT / "mt_dev.jsonl", dev_mt)
    write_jsonl(OUT / "en_test.jsonl", test_en)
    write_jsonl(OUT / "mt_test.jsonl", test_mt)
    # a larger split for checking MAP against an external evaluator
    wide_en, _ = make_split(rng, "wide", 20, 200)
    write_jsonl(OUT / "en_wide.jsonl", wide_en)

    (OUT / "qerank.ini").write_text(
        "[paths]\n"
        "en_dev = en_dev.jsonl\n"
        "en_test = en_test.jsonl\n"
        "mt_dev = mt_dev.jsonl\n"
        "mt_test = mt_test.jsonl\n"
        "embeddings = embeddings.txt\n"
        "hypernyms = hypernyms.tsv\n"
        "kb_cache = kb_cache.jsonl\n"
        "\n[bm25]\nk1 = 1.2\nb = 0.75\n"
        "\n[expansion]\nk_neighbors = 2\nhypernym_threshold = 0.75\n",
        encoding="utf-8",
    )
    (OUT / "wide.ini").write_text(
        "[paths]\n"
        "en_test = en_wide.jsonl\n"
        "embeddings = embeddings.txt\n"
        "hypernyms = hypernyms.tsv\n"
        "kb_cache = kb_cache.jsonl\n",
        encoding="utf-8",
    )
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
