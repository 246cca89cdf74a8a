"""Drive the built server through the pipeline's scorer client.

Spawns ``node <server_js> --model <model_path>`` with the pipeline's own
external-scorer client (which pings the child on startup), replays a fixed
set of scoring cases against both the client and the natively loaded model
file, and prints the paired results as JSON on stdout.

Usage:  python3 test/driver.py MODEL_PATH SERVER_JS
"""

import json
import sys

from lfnsum.lm import NGramLanguageModel, spawn_external

CASES = [
    {"op": "logprob", "text": ["the", "market", "closed", "higher", "today"]},
    {"op": "logprob", "text": ["an", "unheard", "word"]},
    {"op": "logprob", "text": ["rain"]},
    {"op": "logprob", "text": ["<s>", "the", "market"]},
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
]


def main():
    model_path, server_js = sys.argv[1], sys.argv[2]
    native = NGramLanguageModel.load(model_path)
    results = []
    with spawn_external(["node", server_js, "--model", model_path]) as scorer:
        for case in CASES:
            if case["op"] == "logprob":
                external = scorer.logprob(case["text"])
                reference = native.logprob(case["text"])
            else:
                external = scorer.conditional_logprob(case["target"], case["condition"])
                reference = native.conditional_logprob(case["target"], case["condition"])
            results.append({"external": external, "native": reference})
    print(json.dumps(results))


if __name__ == "__main__":
    main()
