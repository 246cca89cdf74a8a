"""Generate the committed model and reference-score fixtures.

Trains two small n-gram scorers on a fixed corpus through the pipeline's
public library API, saves them as model files, records native scores for a
set of scoring cases, records Python float reprs for the serializer tests,
and writes the transcript request file exactly as the pipeline's client
writes request lines.

Run from the package root:  python3 scripts/make_model_fixtures.py
"""

import json
import pathlib

from lfnsum.lm import NGramLanguageModel, train_ngram

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

CORPUS = [
    "the market closed higher today",
    "the market closed lower today",
    "the market opened higher this morning",
    "rain fell over the city at night",
    "rain fell over the valley at dawn",
    "heavy rain fell during the afternoon",
    "the forecast said rain would fall",
    "the forecast said snow would fall",
    "snow covered the city by morning",
    "traders watched the market all day",
    "traders watched the numbers all night",
    "the city stayed quiet after the storm",
    "the storm passed over the valley",
    "a cold wind crossed the city",
    "a warm wind crossed the valley",
    "prices rose while the wind eased",
    "prices fell while the rain continued",
    "the numbers told a simple story",
    "a simple story moved the market",
    "morning light crossed the quiet city",
]

SCORING_CASES = [
    {"op": "logprob", "text": ["the", "market", "closed", "higher", "today"]},
    {"op": "logprob", "text": ["an", "unheard", "word"]},
    {"op": "logprob", "text": ["rain"]},
    {"op": "logprob", "text": ["<s>", "the", "market"]},
    {"op": "logprob", "text": ["prices", "rose", "while", "the", "rain", "continued"]},
    {
        "op": "cond",
        "target": ["rain", "would", "fall"],
        "condition": ["the", "forecast", "said"],
    },
    {"op": "cond", "target": ["the", "market", "closed"], "condition": []},
    {
        "op": "cond",
        "target": ["the", "valley"],
        "condition": ["the", "storm", "passed", "over", "the", "city", "and"],
    },
    {"op": "cond", "target": ["snow", "covered", "the", "city"], "condition": None},
]

FLOAT_SAMPLES = [
    0.0,
    -0.0,
    1.0,
    2.0,
    -2.0,
    120.0,
    0.1,
    -123.456,
    3.0000000000000004,
    0.0001,
    1e-05,
    1e-07,
    1.5e-07,
    -2.302585092994046,
    3.141592653589793,
    9999999999999998.0,
    1e16,
    1.2345678901234568e17,
    1e21,
    1.2345678901234567e-30,
    5e-324,
    1.7976931348623157e308,
    -1.7976931348623157e308,
]

TRANSCRIPT_REQUESTS = [
    {"op": "ping"},
    {"op": "logprob", "text": ["the", "market", "closed", "higher", "today"]},
    {"op": "logprob", "text": ["an", "unheard", "word"]},
    {"op": "cond", "target": ["rain", "would", "fall"], "condition": ["the", "forecast", "said"]},
    {"op": "cond", "target": ["the", "market", "closed"], "condition": []},
    {"op": "logprob", "text": ["rain"]},
    {"op": "logprob", "text": ["<s>", "the", "market"]},
    {
        "op": "cond",
        "target": ["the", "valley"],
        "condition": ["the", "storm", "passed", "over", "the", "city", "and"],
    },
    {"op": "frob"},
    {"op": "logprob", "text": ["prices", "rose", "while", "the", "rain", "continued"]},
    {"op": "café"},
    {"op": "ping"},
]


def score(model, case):
    if case["op"] == "logprob":
        return model.logprob(case["text"])
    condition = case["condition"] if case["condition"] is not None else []
    return model.conditional_logprob(case["target"], condition)


def main():
    FIXTURES.mkdir(exist_ok=True)
    sequences = [line.split() for line in CORPUS]

    marked = train_ngram(sequences, order=3, k=0.01, sentence_markers=True)
    marked.save(FIXTURES / "model.json")
    unmarked = train_ngram(sequences, order=3, k=0.01, sentence_markers=False)
    unmarked.save(FIXTURES / "model_nomark.json")

    for name in ("model.json", "model_nomark.json"):
        reloaded = NGramLanguageModel.load(FIXTURES / name)
        entries = []
        for case in SCORING_CASES:
            entries.append(dict(case, value=score(reloaded, case)))
        out = FIXTURES / name.replace(".json", "_scores.json")
        out.write_text(json.dumps(entries, indent=1) + "\n", encoding="utf-8")

    floats = [[value, repr(value)] for value in FLOAT_SAMPLES]
    (FIXTURES / "pyfloat.json").write_text(
        json.dumps(floats, indent=1) + "\n", encoding="utf-8"
    )

    # Request lines exactly as the pipeline's client writes them: ids
    # assigned in send order, id key first, ensure_ascii off, default
    # separators.  Two off-protocol lines are spliced in to freeze the
    # recovery behavior: a blank line (no response) and a non-JSON line
    # (one malformed-line response).
    lines = []
    for i, payload in enumerate(TRANSCRIPT_REQUESTS, start=1):
        lines.append(json.dumps({"id": i, **payload}, ensure_ascii=False))
        if i == 9:
            lines.append("")
        if i == 10:
            lines.append("this is not json {")
    (FIXTURES / "requests.ndjson").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )

    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
