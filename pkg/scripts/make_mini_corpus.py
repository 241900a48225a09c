"""Regenerate the bundled mini corpus under data/mini/.

Four partitions (2 topics x 2 stances), each with themed argument groups
plus a couple of strays, and dim-16 synthetic embeddings built from one
unit direction per theme with small noise. Deterministic; run from the
repository root:

    python3 scripts/make_mini_corpus.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "data" / "mini"
DIM = 16
NOISE = 0.04
STRAY_NOISE = 0.9

# topic text -> stance -> list of (theme name, argument texts)
CORPUS = {
    "We should adopt school uniforms": {
        "pro": [
            ("equality", [
                "Uniforms make students from different backgrounds look equal.",
                "A shared dress code hides income differences between families.",
                "Everyone wearing the same outfit reduces visible social gaps.",
                "Uniforms stop fashion competition between wealthy and poor students.",
                "With uniforms nobody is judged for cheap clothing.",
            ]),
            ("focus", [
                "Uniforms remove morning outfit decisions and save class time.",
                "Students concentrate better when clothing is not a distraction.",
                "A fixed dress code keeps attention on lessons instead of looks.",
                "Teachers report calmer classrooms when everyone dresses alike.",
                "Getting ready for school is faster with a single uniform.",
            ]),
            ("safety", [
                "Uniforms make intruders easy to spot on school grounds.",
                "Staff can identify students instantly during field trips.",
                "A common uniform improves security at the school gate.",
                "Lost children are found faster when wearing school colours.",
            ]),
        ],
        "con": [
            ("cost", [
                "Uniforms are an extra expense many families cannot afford.",
                "Parents must buy uniforms on top of normal clothes.",
                "Mandatory uniforms put a financial burden on poor households.",
                "Replacing outgrown uniforms every year costs families dearly.",
                "School outfits are overpriced compared with regular clothing.",
            ]),
            ("expression", [
                "Uniforms suppress the personal style of young people.",
                "Students lose a key outlet for self expression.",
                "Forcing identical clothing stifles individuality and creativity.",
                "Clothing choice is how teenagers explore their identity.",
                "A dress code silences the personality students show through clothes.",
            ]),
            ("comfort", [
                "Standard uniforms fit some bodies badly and feel uncomfortable.",
                "Stiff uniform fabric is unpleasant in hot weather.",
                "One cut of clothing cannot suit every student shape.",
                "Scratchy collars and ties make long school days miserable.",
            ]),
        ],
    },
    "Social media platforms should be regulated": {
        "pro": [
            ("misinformation", [
                "Regulation would curb the spread of false news online.",
                "Platforms amplify rumours unless rules force fact checking.",
                "Unchecked feeds let misinformation reach millions overnight.",
                "Oversight makes companies remove fabricated stories quickly.",
                "Election lies spread freely without regulatory pressure.",
            ]),
            ("minors", [
                "Rules would shield children from harmful online content.",
                "Regulation can enforce age limits that platforms ignore.",
                "Young users need legal protection from addictive feeds.",
                "Oversight forces platforms to moderate content aimed at kids.",
                "Without regulation minors are exposed to predatory material.",
            ]),
            ("privacy", [
                "Regulation stops platforms from hoarding personal data.",
                "Legal limits would end the covert sale of user information.",
                "Users deserve enforceable rights over their own data.",
                "Data collection continues unchecked until law intervenes.",
            ]),
        ],
        "con": [
            ("speech", [
                "Government regulation of social media threatens free speech.",
                "State control over platforms opens the door to censorship.",
                "Regulators could silence dissenting voices online.",
                "Speech rules written by politicians chill public debate.",
                "Freedom of expression suffers when officials police posts.",
            ]),
            ("private", [
                "Social media companies are private and should set their own rules.",
                "The state has no business managing private platforms.",
                "Market pressure, not law, should discipline tech companies.",
                "Private firms are entitled to run their services as they choose.",
                "Government meddling in private business stalls innovation.",
            ]),
            ("ineffective", [
                "Regulation would be ineffective because users evade rules easily.",
                "Banned content simply migrates to offshore platforms.",
                "Laws lag years behind fast moving online behaviour.",
                "Enforcement across borders is practically impossible.",
            ]),
        ],
    },
}

REFERENCES = {
    ("We should adopt school uniforms", "pro"): [
        "Uniforms promote equality among students.",
        "Uniforms help students focus on learning.",
        "Uniforms improve school safety.",
    ],
    ("We should adopt school uniforms", "con"): [
        "Uniforms are expensive for families.",
        "Uniforms limit self expression.",
        "Uniforms are uncomfortable.",
    ],
    ("Social media platforms should be regulated", "pro"): [
        "Regulation prevents the spread of misinformation.",
        "Regulation protects children online.",
        "Regulation safeguards user privacy.",
    ],
    ("Social media platforms should be regulated", "con"): [
        "Regulation harms freedom of speech.",
        "Private companies should not be regulated by the state.",
        "Regulation of platforms would be ineffective.",
    ],
}

STRAYS = {
    ("We should adopt school uniforms", "pro"): [
        "My cousin's school picked navy blue sweaters last spring.",
    ],
    ("We should adopt school uniforms", "con"): [
        "The uniform debate came up at the town hall meeting again.",
    ],
    ("Social media platforms should be regulated", "pro"): [
        "A documentary about feeds aired on public television recently.",
    ],
    ("Social media platforms should be regulated", "con"): [
        "Lawmakers held another hearing with tech executives last month.",
    ],
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(7)

    arguments = []
    vectors = {}
    for topic, stances in CORPUS.items():
        for stance, themes in stances.items():
            theme_dirs = {}
            for theme, _ in themes:
                raw = rng.normal(size=DIM)
                theme_dirs[theme] = raw / np.linalg.norm(raw)
            for theme, texts in themes:
                for text in texts:
                    arg_id = f"arg{len(arguments):03d}"
                    arguments.append({"arg_id": arg_id, "argument": text, "topic": topic, "stance": stance})
                    vectors[arg_id] = theme_dirs[theme] + rng.normal(scale=NOISE, size=DIM)
            for text in STRAYS[(topic, stance)]:
                arg_id = f"arg{len(arguments):03d}"
                arguments.append({"arg_id": arg_id, "argument": text, "topic": topic, "stance": stance})
                vectors[arg_id] = rng.normal(scale=STRAY_NOISE, size=DIM)

    key_points = []
    for (topic, stance), texts in REFERENCES.items():
        for text in texts:
            key_points.append(
                {"key_point_id": f"kp{len(key_points):03d}", "key_point": text, "topic": topic, "stance": stance}
            )

    # A few labels: first argument of each partition matches its first reference.
    labels = []
    for (topic, stance), _ in REFERENCES.items():
        args_here = [a for a in arguments if a["topic"] == topic and a["stance"] == stance]
        kps_here = [k for k in key_points if k["topic"] == topic and k["stance"] == stance]
        labels.append({"arg_id": args_here[0]["arg_id"], "key_point_id": kps_here[0]["key_point_id"], "label": 1})
        labels.append({"arg_id": args_here[1]["arg_id"], "key_point_id": kps_here[1]["key_point_id"], "label": 0})

    with (OUT / "arguments.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["arg_id", "argument", "topic", "stance"])
        writer.writeheader()
        writer.writerows(arguments)
    with (OUT / "key_points.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["key_point_id", "key_point", "topic", "stance"])
        writer.writeheader()
        writer.writerows(key_points)
    with (OUT / "labels.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["arg_id", "key_point_id", "label"])
        writer.writeheader()
        writer.writerows(labels)
    with (OUT / "embeddings.jsonl").open("w", encoding="utf-8") as handle:
        for arg_id, vec in vectors.items():
            handle.write(json.dumps({"id": arg_id, "vector": [round(float(v), 6) for v in vec]}) + "\n")

    print(f"wrote {len(arguments)} arguments, {len(key_points)} key points, {len(labels)} labels to {OUT}")


if __name__ == "__main__":
    main()
