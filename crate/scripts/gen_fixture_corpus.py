#!/usr/bin/env python3
"""Generate the synthetic desk-scale corpus and matching evaluation sets.

The corpus is built from sentence templates over a small lexicon with
planted relations (country/capital, gender pairs, plurals, past tense,
comparatives) plus topical filler, so that co-occurrence statistics carry
enough structure for similarity and analogy evaluation.

Outputs (into the directory given as argv[1], default ./fixtures):
  corpus.txt       plain text, one paragraph per line
  similarity.csv   word1,word2,score with header
  analogy.txt      Google analogy format with ": section" labels

Deterministic: seeded RNG, no external inputs.
"""

import itertools
import os
import random
import sys

SEED = 20190531
TARGET_TOKENS = 110_000

COUNTRIES = [
    ("france", "paris", "french"), ("germany", "berlin", "german"),
    ("italy", "rome", "italian"), ("spain", "madrid", "spanish"),
    ("russia", "moscow", "russian"), ("japan", "tokyo", "japanese"),
    ("china", "beijing", "chinese"), ("egypt", "cairo", "egyptian"),
    ("greece", "athens", "greek"), ("poland", "warsaw", "polish"),
    ("austria", "vienna", "austrian"), ("norway", "oslo", "norwegian"),
    ("sweden", "stockholm", "swedish"), ("portugal", "lisbon", "portuguese"),
    ("ireland", "dublin", "irish"), ("turkey", "ankara", "turkish"),
    ("canada", "ottawa", "canadian"), ("peru", "lima", "peruvian"),
    ("kenya", "nairobi", "kenyan"), ("cuba", "havana", "cuban"),
]

GENDER = [
    ("man", "woman"), ("king", "queen"), ("boy", "girl"),
    ("father", "mother"), ("son", "daughter"), ("brother", "sister"),
    ("husband", "wife"), ("uncle", "aunt"), ("prince", "princess"),
    ("nephew", "niece"), ("lord", "lady"), ("actor", "actress"),
    ("god", "goddess"), ("grandfather", "grandmother"), ("emperor", "empress"),
]

TOPICS = {
    "animal": ["cat", "dog", "horse", "bird", "fish", "cow", "lion", "tiger",
               "wolf", "bear", "mouse", "snake", "rabbit", "sheep", "goat"],
    "food": ["bread", "apple", "cheese", "rice", "meat", "soup", "cake",
             "milk", "wine", "coffee", "sugar", "salt", "butter", "fruit"],
    "music": ["song", "piano", "guitar", "drum", "violin", "concert",
              "band", "album", "melody", "singer", "opera", "choir"],
    "sport": ["football", "tennis", "game", "team", "match", "player",
              "ball", "goal", "coach", "league", "stadium", "season"],
    "science": ["physics", "chemistry", "energy", "atom", "theory",
                "experiment", "laboratory", "molecule", "electron", "planet",
                "star", "telescope"],
    "war": ["army", "battle", "soldier", "weapon", "general", "navy",
            "victory", "enemy", "troops", "siege", "fortress", "sword"],
    "nature": ["river", "mountain", "forest", "lake", "sea", "island",
               "valley", "desert", "tree", "flower", "rain", "snow"],
    "building": ["house", "church", "castle", "tower", "bridge", "palace",
                 "school", "hospital", "library", "museum", "temple", "wall"],
}

TOPIC_VERBS = {
    "animal": ["hunt", "feed", "chase"],
    "food": ["cook", "eat", "bake"],
    "music": ["play", "sing", "record"],
    "sport": ["win", "score", "train"],
    "science": ["study", "measure", "discover"],
    "war": ["fight", "attack", "defend"],
    "nature": ["climb", "cross", "explore"],
    "building": ["build", "visit", "design"],
}

PAST = {
    "hunt": "hunted", "feed": "fed", "chase": "chased", "cook": "cooked",
    "eat": "ate", "bake": "baked", "play": "played", "sing": "sang",
    "record": "recorded", "win": "won", "score": "scored", "train": "trained",
    "study": "studied", "measure": "measured", "discover": "discovered",
    "fight": "fought", "attack": "attacked", "defend": "defended",
    "climb": "climbed", "cross": "crossed", "explore": "explored",
    "build": "built", "visit": "visited", "design": "designed",
}

COMPARATIVE = [
    ("big", "bigger"), ("small", "smaller"), ("old", "older"),
    ("young", "younger"), ("long", "longer"), ("strong", "stronger"),
    ("high", "higher"), ("fast", "faster"), ("cold", "colder"),
    ("warm", "warmer"), ("rich", "richer"), ("dark", "darker"),
]

IRREGULAR_PLURAL = {
    "mouse": "mice", "sheep": "sheep", "fish": "fish", "wolf": "wolves",
    "goat": "goats", "knife": "knives", "man": "men", "woman": "women",
    "city": "cities",
}

PLURAL_NOUNS = [
    "cat", "dog", "horse", "bird", "lion", "tiger", "bear", "rabbit",
    "song", "drum", "band", "album", "team", "player", "ball", "goal",
    "star", "planet", "atom", "soldier", "weapon", "river", "mountain",
    "forest", "lake", "island", "tree", "flower", "house", "church",
    "castle", "tower", "bridge", "school", "apple", "cake",
]

FILLER_ADJ = ["famous", "ancient", "modern", "beautiful", "large", "great",
              "important", "popular", "small", "new", "old", "early", "late"]


def plural(w):
    if w in IRREGULAR_PLURAL:
        return IRREGULAR_PLURAL[w]
    if w.endswith("y"):
        return w[:-1] + "ies"
    if w.endswith(("s", "sh", "ch")):
        return w + "es"
    return w + "s"


class Gen:
    def __init__(self, rng):
        self.rng = rng
        self.word_topic = {w: t for t, ws in TOPICS.items() for w in ws}

    def pick(self, xs):
        return self.rng.choice(xs)

    def topic_word(self, topic):
        ws = TOPICS[topic]
        # mild Zipf inside a topic
        weights = [1.0 / (k + 1) ** 0.6 for k in range(len(ws))]
        return self.rng.choices(ws, weights)[0]

    def s_capital(self):
        country, capital, lang = self.pick(COUNTRIES)
        adj = self.pick(FILLER_ADJ)
        return self.pick([
            f"the capital of {country} is {capital}.",
            f"{capital} is the largest city in {country}.",
            f"the {adj} city of {capital} lies in {country}.",
            f"people in {country} speak {lang} and many live in {capital}.",
            f"the {lang} government moved from {capital} to another city of {country} for a short time.",
            f"in {capital} the {lang} language is spoken by most people.",
            f"{country} has a {adj} history and its capital {capital} is old.",
        ])

    def s_gender(self):
        m, f = self.pick(GENDER)
        m2, f2 = self.pick(GENDER)
        return self.pick([
            f"the {m} said that he would return to his home.",
            f"the {f} said that she would return to her home.",
            f"he was a {m} and his {m2} was a {self.pick(FILLER_ADJ)} {m2}.",
            f"she was a {f} and her {f2} lived with her.",
            f"the {m} and the {f} married in the {self.topic_word('building')}.",
            f"his {m2} became a {m} when he was young.",
            f"her {f2} became a {f} when she was young.",
            f"the {m} told him that he was the {m2}.",
            f"the {f} told her that she was the {f2}.",
        ])

    def s_plural(self):
        n = self.pick(PLURAL_NOUNS)
        p = plural(n)
        num = self.pick(["two", "three", "many", "several", "some"])
        return self.pick([
            f"one {n} and {num} {p} were seen.",
            f"there is a {n} near the {self.topic_word('nature')}.",
            f"there are {num} {p} near the {self.topic_word('nature')}.",
            f"the {p} are {self.pick(FILLER_ADJ)} and the {n} is {self.pick(FILLER_ADJ)}.",
            f"a single {n} is {self.pick(FILLER_ADJ)} but {num} {p} are {self.pick(FILLER_ADJ)}.",
        ])

    def s_verb(self):
        topic = self.pick(list(TOPIC_VERBS))
        v = self.pick(TOPIC_VERBS[topic])
        past = PAST[v]
        obj = self.topic_word(topic)
        return self.pick([
            f"today they {v} the {obj}.",
            f"yesterday they {past} the {obj}.",
            f"every day we {v} a {obj} together.",
            f"last year we {past} a {obj} together.",
            f"they will {v} the {obj} tomorrow.",
            f"they had {past} the {obj} before the war.",
        ])

    def s_comparative(self):
        a, c = self.pick(COMPARATIVE)
        t = self.pick(list(TOPICS))
        x, y = self.topic_word(t), self.topic_word(t)
        return self.pick([
            f"the {x} is {a} but the {y} is {c} than the {x}.",
            f"a {a} {x} was found near a {c} {y}.",
            f"this {x} is {c} than that {y}.",
            f"it was a very {a} {x}.",
        ])

    def s_topic(self):
        t = self.pick(list(TOPICS))
        ws = [self.topic_word(t) for _ in range(4)]
        adj = self.pick(FILLER_ADJ)
        v = self.pick(TOPIC_VERBS[t])
        return self.pick([
            f"the {ws[0]} and the {ws[1]} were {adj}.",
            f"a {adj} {ws[0]} with a {ws[1]} and a {ws[2]}.",
            f"many people {v} the {ws[0]} and the {ws[1]} in the {ws[2]}.",
            f"the {ws[0]} of the {ws[1]} is near the {ws[2]} and the {ws[3]}.",
            f"in the {ws[0]} there was a {adj} {ws[1]}.",
            f"it is known for its {ws[0]}, {ws[1]} and {ws[2]}.",
        ])

    def sentence(self):
        kinds = [self.s_capital, self.s_gender, self.s_plural, self.s_verb,
                 self.s_comparative, self.s_topic]
        weights = [0.18, 0.18, 0.16, 0.14, 0.10, 0.24]
        return self.rng.choices(kinds, weights)[0]()


def write_corpus(path, rng):
    gen = Gen(rng)
    tokens = 0
    lines = []
    while tokens < TARGET_TOKENS:
        para = []
        for _ in range(rng.randint(3, 8)):
            s = gen.sentence()
            tokens += len(s.replace(",", " ").split())
            para.append(s[0].upper() + s[1:])
        lines.append(" ".join(para))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return tokens


def write_analogy(path):
    sections = []
    caps = []
    for (c1, k1, _), (c2, k2, _) in itertools.permutations(COUNTRIES, 2):
        caps.append((c1, k1, c2, k2))
    sections.append(("capital-common-countries", caps))
    nat = []
    for (c1, _, l1), (c2, _, l2) in itertools.permutations(COUNTRIES, 2):
        nat.append((c1, l1, c2, l2))
    sections.append(("gram6-nationality-adjective", nat))
    fam = [(m1, f1, m2, f2) for (m1, f1), (m2, f2) in itertools.permutations(GENDER, 2)]
    sections.append(("family", fam))
    comp = [(a1, c1, a2, c2) for (a1, c1), (a2, c2) in itertools.permutations(COMPARATIVE, 2)]
    sections.append(("gram3-comparative", comp))
    past_pairs = sorted(PAST.items())
    past = [(v1, p1, v2, p2) for (v1, p1), (v2, p2) in itertools.permutations(past_pairs, 2)]
    sections.append(("gram7-past-tense", past))
    pl_pairs = [(n, plural(n)) for n in PLURAL_NOUNS]
    pl = [(n1, p1, n2, p2) for (n1, p1), (n2, p2) in itertools.permutations(pl_pairs, 2)]
    sections.append(("gram8-plural", pl))
    # a few out-of-vocabulary questions, as in real benchmark files
    sections.append(("oov", [("zebra", "zebras", "cat", "cats"),
                             ("kyoto", "japan", "paris", "france"),
                             ("duke", "duchess", "king", "queen")]))
    with open(path, "w") as f:
        for name, qs in sections:
            f.write(f": {name}\n")
            for q in qs:
                f.write(" ".join(q) + "\n")


def write_similarity(path, rng):
    rows = []
    topics = list(TOPICS)
    for t in topics:
        ws = TOPICS[t]
        for _ in range(5):
            a, b = rng.sample(ws, 2)
            rows.append((a, b, round(rng.uniform(6.5, 9.5), 2)))
    for _ in range(30):
        t1, t2 = rng.sample(topics, 2)
        rows.append((rng.choice(TOPICS[t1]), rng.choice(TOPICS[t2]),
                     round(rng.uniform(0.5, 3.5), 2)))
    for m, f in GENDER[:8]:
        rows.append((m, f, round(rng.uniform(6.0, 8.5), 2)))
    for c, k, _ in COUNTRIES[:8]:
        rows.append((c, k, round(rng.uniform(6.0, 8.0), 2)))
    rows.append(("unicorn", "dragon", 7.1))
    rows.append(("cat", "spaceship", 0.4))
    with open(path, "w") as f:
        f.write("Word 1,Word 2,Human (mean)\n")
        for a, b, s in rows:
            f.write(f"{a},{b},{s}\n")


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    os.makedirs(out, exist_ok=True)
    rng = random.Random(SEED)
    n = write_corpus(os.path.join(out, "corpus.txt"), rng)
    write_analogy(os.path.join(out, "analogy.txt"))
    write_similarity(os.path.join(out, "similarity.csv"), rng)
    print(f"corpus tokens ~{n}")


if __name__ == "__main__":
    main()
