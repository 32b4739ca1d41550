#!/usr/bin/env python3
"""Regenerate the bundled corpora under data/.

Output is a pure function of the fixed seeds below, so rerunning leaves the
files byte-identical.

    python3 tools/make_fixtures.py [data-dir]
"""

import json
import os
import random
import sys

ROOT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data")


def write_jsonl(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


# --- separable: two classes with disjoint vocabularies ----------------------

POS_WORDS = ["keyword", "bid", "campaign", "impression", "click", "advertiser", "landing", "query", "ctr",
             "auction", "sponsored", "budget", "conversion", "creative", "headline", "targeting", "cpc",
             "retargeting", "banner", "placement", "publisher", "adgroup", "broadmatch", "exactmatch",
             "negativekw", "quality", "relevance", "extension", "sitelink", "callout"]
NEG_WORDS = ["glacier", "volcano", "sediment", "basalt", "tectonic", "erosion", "fossil", "magma", "quartz",
             "granite", "limestone", "aquifer", "delta", "moraine", "canyon", "plateau", "stratum", "mantle",
             "crust", "lava", "geyser", "dune", "estuary", "tundra", "taiga", "monsoon", "permafrost",
             "caldera", "fjord", "atoll"]


def separable(rng, words, prefix, n):
    rows = []
    for i in range(n):
        k = rng.randint(8, 20)
        rows.append({"id": f"{prefix}-{i:04d}", "text": " ".join(rng.choice(words) for _ in range(k))})
    return rows


def make_separable():
    rng = random.Random(20240501)
    d = os.path.join(ROOT, "separable")
    write_jsonl(os.path.join(d, "train_pos.jsonl"), separable(rng, POS_WORDS, "pos", 500))
    write_jsonl(os.path.join(d, "train_neg.jsonl"), separable(rng, NEG_WORDS, "neg", 500))
    write_jsonl(os.path.join(d, "heldout_pos.jsonl"), separable(rng, POS_WORDS, "hpos", 100))
    write_jsonl(os.path.join(d, "heldout_neg.jsonl"), separable(rng, NEG_WORDS, "hneg", 100))


# --- demo: a small ads-domain corpus and a mixed general corpus -------------

PRODUCTS = ["running shoes", "travel insurance", "noise cancelling headphones", "home loans", "yoga mats",
            "electric scooters", "coffee grinders", "language courses", "hiking boots", "car rentals",
            "wireless routers", "meal kits", "standing desks", "pet insurance", "ski packages"]
BRANDS = ["Northwind", "Blue Fjord", "Acorn Labs", "Peak Outfitters", "Harbor Finance", "Lumen Audio",
          "Crescent Travel", "Oakline", "Sparrow Tech", "Red Mesa"]

AD_SENTENCES = [
    "When a user searches for {p}, the advertiser wants the ad to match the intent of the query.",
    "{b} bids on the keyword {p} because the query shows a strong commercial intent.",
    "The ad title should mention {p} so that the click through rate improves for that query.",
    "Therefore the landing page of {b} is relevant only if it actually sells {p}.",
    "A good query rewrite for {p} keeps the same intent but uses words that the advertiser bid on.",
    "The relevance model compares the query with the ad copy and explains why a match is weak or strong.",
    "Since {b} targets people who want {p}, the campaign groups similar keywords into one ad group.",
    "For example, a search for cheap {p} should not show an ad that promotes premium {p}.",
    "The sponsored search system ranks each ad by its bid and by the predicted click probability.",
    "Consider the query {p} near me, which implies that the user wants a local store.",
    "The ad copy of {b} highlights what makes their {p} different from the other advertisers.",
    "As a result, a relevant ad brings more conversions for {b} and a better experience for the user.",
]

GENERAL_TOPICS = {
    "cooking": [
        "The soup needs to simmer slowly so that the flavour of the onions can develop.",
        "First, chop the garlic and fry it in olive oil until it turns golden.",
        "Bread rises because the yeast produces gas that is trapped in the dough.",
        "A pinch of salt makes the sweetness of the sauce more noticeable.",
        "The recipe explains why the oven should be hot before the tray goes in.",
        "Finally, let the cake cool on a rack so that the bottom does not become soggy.",
    ],
    "geology": [
        "The river carved the canyon over millions of years as the plateau slowly rose.",
        "Basalt forms when lava cools quickly at the surface of the earth.",
        "Glaciers move because the ice deforms under its own enormous weight.",
        "The fossil record shows that these layers were deposited in a shallow sea.",
        "Therefore the age of each layer can be estimated from the rate of deposition.",
        "Earthquakes happen where the plates of the crust grind past each other.",
    ],
    "math": [
        "To solve the equation, first subtract three from both sides and then divide by two.",
        "The derivative of a product follows from the definition of the limit.",
        "Suppose the triangle has sides three, four and five, then it is a right triangle.",
        "This result implies that the sum of the first n odd numbers equals n squared.",
        "Consider a sequence where each term is twice the previous one.",
        "We substitute the value back into the original equation to check the answer.",
    ],
}

NAV = ["Home | Products | Contact Us | Sign In", "Skip to content | Privacy Policy | Terms of Use",
       "Buy now | Free shipping on all orders | Click here", "Subscribe | Log in | All rights reserved",
       "Best price guaranteed | Order now | Limited time offer"]


def fill(tmpl, rng):
    return tmpl.format(p=rng.choice(PRODUCTS), b=rng.choice(BRANDS))


def ad_doc(rng, n_sent):
    return " ".join(fill(rng.choice(AD_SENTENCES), rng) for _ in range(n_sent))


def topic_doc(rng, topic, n_sent):
    return " ".join(rng.choice(GENERAL_TOPICS[topic]) for _ in range(n_sent))


def spam_doc(rng):
    p = rng.choice(PRODUCTS)
    return f"{p} {p} {p} | buy now | best price | {rng.choice(BRANDS)} {p} | click here | order now"


def make_demo():
    rng = random.Random(20240502)
    d = os.path.join(ROOT, "demo")

    in_domain = [{"id": f"ads-{i:04d}", "text": ad_doc(rng, rng.randint(4, 8))} for i in range(300)]
    write_jsonl(os.path.join(d, "in_domain.jsonl"), in_domain)

    topics = sorted(GENERAL_TOPICS)
    negatives = [{"id": f"neg-{i:04d}", "text": topic_doc(rng, topics[i % 3], rng.randint(4, 8))}
                 for i in range(300)]
    write_jsonl(os.path.join(d, "negatives.jsonl"), negatives)

    # 1000 general documents over two shards: ads prose, ads spam, other
    # prose and navigation boilerplate.
    general = []
    for i in range(1000):
        r = rng.random()
        if r < 0.25:
            text, kind = ad_doc(rng, rng.randint(3, 7)), "ads"
        elif r < 0.35:
            text, kind = spam_doc(rng), "ads_spam"
        elif r < 0.85:
            text, kind = topic_doc(rng, rng.choice(topics), rng.randint(3, 7)), "other"
        else:
            text, kind = rng.choice(NAV), "navigation"
        general.append({"id": f"web-{i:04d}", "text": text, "kind": kind})
    write_jsonl(os.path.join(d, "general", "shard-00.jsonl"), general[:500])
    write_jsonl(os.path.join(d, "general", "shard-01.jsonl"), general[500:])

    tasks = [
        ("Query Rewrites (QR)", "rewrite a search query into alternatives with the same intent",
         "Rewrite the user query \"{p}\" into alternative queries with the same intent."),
        ("Ad Copy Generation (AG)", "write ad copy from a landing page",
         "Write an ad copy for {b}, a company that sells {p}."),
        ("Title Rewriting (TR)", "rewrite an ad title for a query",
         "Rewrite the ad title \"{b} {p}\" for the query \"best {p}\"."),
        ("Query-Ad Copy Relevance (QAC)", "judge whether an ad copy fits a query",
         "Is the ad copy \"Affordable {p} from {b}\" relevant to the query \"{p} deals\"?"),
        ("Query-Landing Page Relevance (QLP)", "judge whether a landing page fits a query",
         "Is the {b} landing page about {p} relevant to the query \"cheap {p}\"?"),
    ]
    pools = []
    for name, desc, tmpl in tasks:
        seen = set()
        while len(seen) < 8:
            seen.add(fill(tmpl, rng))
        for s in sorted(seen):
            pools.append({"task": name, "description": desc, "statement": s})
    write_jsonl(os.path.join(d, "task_pools.jsonl"), pools)

    preds = []
    for i in range(200):
        label = i % 2
        score = round(min(1.0, max(0.0, rng.gauss(0.65 if label else 0.35, 0.2))), 3)
        preds.append({"id": f"p{i:03d}", "score": score, "label": label})
    write_jsonl(os.path.join(d, "predictions.jsonl"), preds)

    cases = []
    for i in range(20):
        p, b = rng.choice(PRODUCTS), rng.choice(BRANDS)
        detailed = f"{b} sells {p} with free returns, and the ad names the exact product the user asked for."
        short = f"{b} {p}."
        a_first = rng.random() < 0.7
        cases.append({"instruction": f"Write an ad title for the query \"{p}\".",
                      "response_a": detailed if a_first else short,
                      "response_b": short if a_first else detailed,
                      "task": rng.choice(["AG", "TR"])})
    write_jsonl(os.path.join(d, "judge_cases.jsonl"), cases)

    fillers = ["cheap", "best", "online", "near me", "deals", "reviews", "2024", "sale", "top rated", "for beginners"]
    rewrites = []
    for p in PRODUCTS[:10]:
        rw = []
        for j in range(10):
            if j < 7:
                rw.append(f"{rng.choice(fillers)} {p}")
            else:
                rw.append(f"{rng.choice(BRANDS).lower()} {rng.choice(PRODUCTS)}")
        rewrites.append({"query": p, "rewrites": rw})
    write_jsonl(os.path.join(d, "rewrites.jsonl"), rewrites)

    config = {
        "seed": 7,
        "paths": {
            "output": "out",
            "in_domain": "in_domain.jsonl",
            "negatives": "negatives.jsonl",
            "general": ["general/shard-00.jsonl", "general/shard-01.jsonl"],
            "task_pools": "task_pools.jsonl",
            "predictions": "predictions.jsonl",
            "judge_cases": "judge_cases.jsonl",
            "rewrites": "rewrites.jsonl",
        },
        "selection": {"mode": "token_budget", "budget_tokens": 30000},
        "synthesis": {"passages": 40},
        "mixture": {"batch_size_tokens": 4096},
    }
    with open(os.path.join(d, "config.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    make_separable()
    make_demo()
