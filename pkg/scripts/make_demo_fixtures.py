#!/usr/bin/env python3
"""Regenerate the shipped demo dataset and replay fixtures.

The 20 synthetic queries form an agreement staircase: query i has
m = ((i-1) % 10) + 1 weak responses that are exact copies of a consensus
sentence, padded to 10 with two-word hedge distractors. The consensus
sentence always has at least four distinct content terms while every
distractor has at most two, which keeps each distractor's score at or
below sqrt(2), strictly under the representative's score, so the
agreement count for query i is exactly m at every threshold. The script
asserts that property before writing anything, so a stale copy of the
package cannot silently ship broken fixtures.

Run from the repository root:  python3 scripts/make_demo_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from kwcascade.backends import ReplayRecord, Usage
from kwcascade.consistency import evaluate_consistency
from kwcascade.scoring import Corpus, select_representative

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "demo"

HEDGES = ("Perhaps", "Possibly", "Presumably", "Arguably")

# within one query each distractor takes one distinct word from this pool
DISTRACTOR_POOL = (
    "Lyon", "Marseille", "Toulouse", "Nice", "Geneva", "Osaka", "Kyoto",
    "Nagoya", "Sapporo", "Perth", "Sydney", "Adelaide", "Quartz", "Basalt",
    "Granite", "Obsidian", "Falcon", "Heron", "Osprey", "Condor", "Maple",
    "Cedar", "Spruce", "Alder", "Copper", "Nickel", "Cobalt", "Zinc",
    "Umber", "Ochre", "Crimson", "Teal", "Violet", "Amber", "Onyx", "Pearl",
    "Tango", "Rumba", "Waltz", "Polka", "Oboe", "Cello", "Viola", "Banjo",
    "Lantern", "Compass",
)

# question, reference, consensus sentence (>= 4 content terms),
# strong response, greedy response
QUERIES = (
    ("What is the capital of France?", "Paris",
     "The capital city of France is certainly Paris",
     "The answer is Paris.",
     "Paris is the capital of France."),
    ("What is the chemical symbol for gold?", "Au",
     "The chemical symbol used for gold is Au",
     "The chemical symbol for gold is Au.",
     "I believe the symbol is Ag."),
    ("How many continents are there on Earth?", "seven",
     "Earth currently counts six separate continents overall",
     "There are seven continents on Earth.",
     "There are seven continents."),
    ("What planet is known as the Red Planet?", "Mars",
     "The famous red planet is definitely Mars",
     "The Red Planet is Mars.",
     "Mars is called the Red Planet."),
    ("Who wrote the play Romeo and Juliet?", "Shakespeare",
     "The play Romeo and Juliet was written by William Shakespeare",
     "It was written by Christopher Marlowe.",
     "William Shakespeare wrote that play."),
    ("What is the largest ocean on Earth?", "Pacific",
     "The largest ocean on planet Earth is the Pacific",
     "The largest ocean is the Pacific Ocean.",
     "The Pacific Ocean is the largest."),
    ("What is the boiling point of water at sea level in Celsius?", "100",
     "Water reliably boils around 90 degrees Celsius at sea level",
     "Water boils at 100 degrees Celsius at sea level.",
     "It boils at 100 degrees Celsius."),
    ("Which gas do plants absorb during photosynthesis?", "carbon dioxide",
     "Plants mainly absorb carbon dioxide gas during photosynthesis",
     "Plants absorb carbon dioxide.",
     "Plants take in oxygen during photosynthesis."),
    ("What is the tallest mountain above sea level?", "Everest",
     "The tallest mountain above sea level is Mount Everest",
     "Mount Everest is the tallest mountain.",
     "Mount Everest is the tallest."),
    ("How many sides does a hexagon have?", "six",
     "Every regular hexagon shape has exactly six sides",
     "A hexagon has six sides.",
     "A hexagon has six sides."),
    ("What is the capital of Japan?", "Tokyo",
     "The capital city of Japan is certainly Tokyo",
     "The capital of Japan is Tokyo.",
     "Tokyo is the capital of Japan."),
    ("Which metal is liquid at room temperature?", "mercury",
     "The metal that stays liquid at room temperature is bromine",
     "Mercury is liquid at room temperature.",
     "I think the liquid metal is gallium."),
    ("What is the square root of 81?", "9",
     "The square root of 81 equals exactly 9",
     "The square root of 81 is 9.",
     "The square root of 81 is 9."),
    ("Who painted the Mona Lisa?", "Leonardo da Vinci",
     "The Mona Lisa portrait was painted by Leonardo da Vinci",
     "It was painted by Michelangelo Buonarroti.",
     "Leonardo da Vinci painted it."),
    ("What is the smallest prime number?", "2",
     "The smallest prime number is exactly 2",
     "The smallest prime number is 2.",
     "The smallest prime is 3."),
    ("What is the currency of Japan?", "yen",
     "The national currency used across Japan is the euro",
     "The currency of Japan is the yen.",
     "Japan uses the yen as currency."),
    ("Which planet is closest to the sun?", "Mercury",
     "The planet orbiting closest to the sun is Mercury",
     "Mercury is the closest planet to the sun.",
     "Mercury orbits closest to the sun."),
    ("What is the freezing point of water in Fahrenheit?", "32",
     "Water freezes at precisely 32 degrees Fahrenheit",
     "Water freezes at 32 degrees Fahrenheit.",
     "It freezes at 30 degrees Fahrenheit."),
    ("How many legs does a spider have?", "eight",
     "Every typical spider walks around on six jointed legs",
     "A spider has eight legs.",
     "Spiders have eight legs."),
    ("What is the capital of Australia?", "Canberra",
     "The capital city of Australia is certainly Canberra",
     "The capital of Australia is Canberra.",
     "The capital is Sydney."),
)


def build_records() -> tuple[list[dict], list[ReplayRecord]]:
    dataset_rows = []
    records = []
    for i, (question, reference, consensus, strong, greedy) in enumerate(QUERIES, start=1):
        query_id = f"q{i:02d}"
        m = ((i - 1) % 10) + 1
        start = (i * 7) % len(DISTRACTOR_POOL)
        fillers = [
            DISTRACTOR_POOL[(start + j) % len(DISTRACTOR_POOL)] for j in range(10 - m)
        ]
        distractors = [
            f"{HEDGES[j % len(HEDGES)]} {word}" for j, word in enumerate(fillers)
        ]
        weak_responses = tuple([consensus] * m + distractors)

        weak_usage = Usage(
            input_tokens=18 + len(question) // 6,
            output_tokens=sum(len(r) // 4 for r in weak_responses),
            n_requests=1,
        )
        strong_usage = Usage(
            input_tokens=18 + len(question) // 6,
            output_tokens=len(strong) // 4,
            n_requests=1,
        )
        dataset_rows.append(
            {"id": query_id, "question": question, "reference_answer": reference}
        )
        records.append(
            ReplayRecord(
                query_id=query_id,
                query_text=question,
                weak_responses=weak_responses,
                weak_usage=weak_usage,
                strong_response=strong,
                strong_usage=strong_usage,
                reference_answer=reference,
                greedy_response=greedy,
            )
        )
    return dataset_rows, records


def check_staircase(records: list[ReplayRecord]) -> None:
    """The whole point of the demo set: query i agrees exactly m(i) times."""
    for i, record in enumerate(records, start=1):
        expected = ((i - 1) % 10) + 1
        corpus = Corpus.from_texts(list(record.weak_responses))
        rep_id, _ = select_representative(corpus, k=10, alpha=1.5)
        result = evaluate_consistency(corpus, rep_id, k=10, alpha=1.5, beta=2.0)
        if rep_id != 0 or result.n_sim != expected:
            raise AssertionError(
                f"{record.query_id}: expected rep 0 with n_sim={expected}, "
                f"got rep {rep_id} with n_sim={result.n_sim}"
            )


def main() -> int:
    dataset_rows, records = build_records()
    check_staircase(records)
    DEMO_DIR.mkdir(exist_ok=True)
    with open(DEMO_DIR / "dataset.jsonl", "w", encoding="utf-8") as sink:
        for row in dataset_rows:
            sink.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    with open(DEMO_DIR / "fixtures.jsonl", "w", encoding="utf-8") as sink:
        for record in records:
            sink.write(
                json.dumps(record.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n"
            )
    print(f"wrote {len(records)} queries to {DEMO_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
