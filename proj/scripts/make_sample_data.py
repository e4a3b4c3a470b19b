#!/usr/bin/env python3
"""Regenerates the bundled synthetic Korean data files deterministically."""

import json
import random


def syllable_inventory(n=420, seed=1):
    rng = random.Random(seed)
    return [chr(0xAC00 + i) for i in rng.sample(range(11172), n)]


def word_list(syllables, n=2500, seed=2):
    rng = random.Random(seed)
    words = set()
    while len(words) < n:
        length = rng.choices([2, 3, 4], weights=[5, 3, 1])[0]
        words.add("".join(rng.choice(syllables) for _ in range(length)))
    return sorted(words)


def zipf_sampler(items, rng):
    weights = [1.0 / (i + 1) for i in range(len(items))]
    total = sum(weights)
    weights = [w / total for w in weights]
    return lambda: rng.choices(items, weights=weights)[0]


def sentence(sample, rng):
    n = rng.randint(5, 15)
    return " ".join(sample() for _ in range(n)) + rng.choice([".", ".", ".", "!", "?"])


def make_korean_sample(path, target_bytes=1_000_000, seed=3):
    rng = random.Random(seed)
    sample = zipf_sampler(word_list(syllable_inventory()), rng)
    out = []
    size = 0
    while size < target_bytes:
        line = " ".join(sentence(sample, rng) for _ in range(rng.randint(1, 4)))
        out.append(line)
        size += len(line.encode("utf-8")) + 1
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + "\n")


def make_pipeline_corpus(path, n_docs=300, seed=4):
    rng = random.Random(seed)
    sample = zipf_sampler(word_list(syllable_inventory()), rng)
    docs = []
    for i in range(n_docs):
        text = " ".join(sentence(sample, rng) for _ in range(rng.randint(2, 5)))
        docs.append({"id": f"doc-{i:04d}", "text": text, "source": "community"})
    # planted problems: short docs and near duplicates
    for i in range(10):
        docs.append({"id": f"short-{i}", "text": sample() + ".", "source": "community"})
    for i in range(15):
        base = docs[rng.randrange(n_docs)]
        words = base["text"].split(" ")
        j = rng.randrange(len(words))
        words[j] = sample()
        docs.append({"id": f"near-dup-{i}", "text": " ".join(words), "source": "community"})
    rng.shuffle(docs)
    with open(path, "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    make_korean_sample("data/korean_sample.txt")
    make_pipeline_corpus("data/pipeline_corpus.jsonl")
    print("done")
