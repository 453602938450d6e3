#!/usr/bin/env python3
"""Regenerates the checked-in fixtures under data/fixtures/ and data/eval/.

All entities are fictional. Output is deterministic.
"""

import json
import random
import sys
from pathlib import Path

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "fixtures"

FIRST = ["Ilsa", "Tomas", "Marta", "Oren", "Priya", "Kenji", "Lucia", "Anders", "Nadia", "Felix",
         "Greta", "Hugo", "Amara", "Viktor", "Selma", "Rafael", "Ingrid", "Mateo", "Yara", "Bruno",
         "Leena", "Caspar", "Dalia", "Emil", "Farah", "Gideon", "Hanne", "Ivo", "Jolene", "Kasimir",
         "Liv", "Magnus", "Noor", "Otto"]
LAST = ["Brandt", "Kovac", "Lindqvist", "Moreau", "Okafor", "Petrov", "Quist", "Romero", "Sato",
        "Tanaka", "Ueda", "Varga", "Weller", "Xu", "Ystad", "Zamora", "Aalto", "Berg", "Castell",
        "Dahl", "Eklund", "Falk", "Gruber", "Holm", "Iversen", "Jansen", "Kral", "Lund", "Meyer",
        "Nyberg", "Olsen", "Pahl", "Rask", "Stenberg"]
STEMS = ["Norvik", "Calder", "Brisa", "Halvard", "Orrin", "Tesmar", "Quillon", "Varden", "Emberly",
         "Solvik", "Korrin", "Aldous", "Marrow", "Pellam", "Rhyne", "Strand", "Tolland", "Ulmer",
         "Wexford", "Yarrow", "Zellin", "Arden", "Bexley", "Corvin", "Dunmore", "Elgin", "Fenwick",
         "Garrow", "Hollis", "Ivers", "Jarvik", "Kestrel", "Larch", "Mercer"]

CATEGORIES = [
    {
        "kind": "company",
        "name": lambda s, r: f"{s} Motors",
        "question": lambda n: f"Who is the CEO of {n}?",
        "answer": lambda r: f"{r.choice(FIRST)} {r.choice(LAST)}",
        "fact": lambda n, a: f"{a} has served as CEO of {n} since {2010 + len(a) % 12}, overseeing its electric vehicle program.",
        "filler": [
            "{n} was founded as a small workshop building delivery vans and grew into a regional carmaker.",
            "The company operates two assembly plants and exports most of its output to neighbouring markets.",
            "Its best known model is a compact hatchback that has been in production for more than a decade.",
            "Analysts describe the firm as a cautious spender that prefers incremental upgrades to bold redesigns.",
            "A supplier network of roughly forty component makers surrounds the main factory site.",
        ],
        "negative": "{n} Racing, the motorsport team that shares a name with the carmaker, announced that its team principal {x} will step down after the season. The racing team has no corporate link to {n} beyond a licensing deal for the logo, and its leadership is not involved in the car company.",
    },
    {
        "kind": "bridge",
        "name": lambda s, r: f"{s} Bridge",
        "question": lambda n: f"How long is the {n}?",
        "answer": lambda r: f"{r.randint(310, 2900)} metres",
        "fact": lambda n, a: f"The {n} spans {a} from abutment to abutment, making it the longest crossing on the river.",
        "filler": [
            "Construction of the {n} began after a ferry accident prompted calls for a fixed crossing.",
            "The deck carries two traffic lanes, a cycle path and a narrow footway on the downstream side.",
            "Engineers chose a cable-stayed design to keep the navigation channel clear for barges.",
            "Maintenance crews repaint the steel towers every twelve years using a lead-free coating.",
            "Local residents often gather on the bridge to watch the autumn regatta pass underneath.",
        ],
        "negative": "Plans for a second crossing near the {n} were shelved this spring. Council documents list several possible lengths for the proposed footbridge, and {x} of the planning office said no design has been approved. The existing structure is not affected by the proposal.",
    },
    {
        "kind": "novel",
        "name": lambda s, r: f"The {s} Letters",
        "question": lambda n: f"Who wrote the novel {n}?",
        "answer": lambda r: f"{r.choice(FIRST)} {r.choice(LAST)}",
        "fact": lambda n, a: f"{n} was written by {a}, who drafted most of the manuscript while working as a lighthouse keeper.",
        "filler": [
            "The novel follows two siblings who exchange letters across a decade of separation.",
            "Critics praised the book for its restrained prose and its patient, episodic structure.",
            "A stage adaptation toured small theatres before the story was optioned for television.",
            "The first edition featured a cover illustration of a storm-lashed harbour at dusk.",
            "Reading groups frequently pair the book with earlier epistolary classics.",
        ],
        "negative": "A new translation of {n} arrives this month. The translator, {x}, spent three years on the project and discussed the challenge of preserving the rhythm of the original letters. The publisher also plans an illustrated anniversary edition of the novel.",
    },
    {
        "kind": "city",
        "name": lambda s, r: f"{s}haven",
        "question": lambda n: f"Who is the mayor of {n}?",
        "answer": lambda r: f"{r.choice(FIRST)} {r.choice(LAST)}",
        "fact": lambda n, a: f"The current mayor of {n} is {a}, elected on a platform of harbour redevelopment and cheaper public transport.",
        "filler": [
            "{n} is a coastal town known for its fish market and its painted wooden houses.",
            "The town council meets monthly in a converted customs house near the old pier.",
            "Tourism has grown steadily since a rail link connected the town to the capital.",
            "A summer music festival fills the main square with visitors every July.",
            "The local museum documents the history of whaling and coastal trade in the region.",
        ],
        "negative": "Candidates for the regional assembly seat that includes {n} held a debate on Tuesday. {x}, a former harbour master, argued for new ferry routes, while other candidates focused on housing. The assembly race is separate from municipal leadership in the town.",
    },
]


def page_html(title, paragraphs, rnd):
    nav = "".join(f'<li><a href="/{w.lower()}">{w}</a></li>' for w in ["Home", "News", "Topics", "About", "Contact", "Subscribe"])
    related = "".join(f'<li><a href="/r{rnd.randint(1, 999)}">More stories</a></li>' for _ in range(4))
    body = "\n".join(f"<p>{p}</p>" for p in paragraphs)
    return (
        "<!DOCTYPE html><html><head><title>" + title + "</title>"
        "<style>body{font-family:serif}</style><script>var tracking = 1;</script></head>"
        "<body><header><div class=\"logo\">Daily Ledger</div></header>"
        f"<nav><ul>{nav}</ul></nav>"
        f"<main><article><h1>{title}</h1>{body}</article></main>"
        f"<aside><h3>Related</h3><ul>{related}</ul></aside>"
        "<footer><p>Copyright Daily Ledger. All rights reserved.</p>"
        "<form><input name=\"q\"><button>Search</button></form></footer>"
        "<!-- analytics --></body></html>"
    )


GENERIC = [
    ("How to choose a family car", "Buying guides recommend comparing running costs, boot space and safety ratings before visiting a dealer. Test drives should include motorway stretches and tight parking. Leasing deals change often, so read the small print on mileage limits."),
    ("Ten tips for public speaking", "Practice in front of a mirror, slow down, and pause after key points. Nervous speakers benefit from arriving early to check the room and the microphone. Short stories help audiences remember the message."),
    ("A beginner's guide to sourdough", "Feed the starter twice a day and keep it somewhere warm. A long cold proof in the fridge develops flavour. Bake in a preheated covered pot to trap steam during the first half of baking."),
    ("What does a chief executive actually do", "Chief executives set strategy, hire senior leaders and report to the board. Their day is filled with meetings, investor calls and site visits. Pay packages are usually tied to long-term share performance."),
    ("The engineering of long bridges", "Suspension and cable-stayed bridges dominate long spans because they carry loads through tension. Wind tunnel testing is essential for slender decks. Expansion joints absorb movement caused by temperature changes."),
    ("How local elections work", "Municipal elections usually take place every four years. Voters choose councillors, who may in turn elect a mayor, although some cities hold direct mayoral elections. Turnout is typically lower than in national polls."),
    ("Why epistolary novels endure", "Novels told through letters let readers assemble the story themselves. The form rewards attention to gaps and silences. Modern writers adapt it with emails and text messages."),
    ("Visiting the coast in winter", "Off-season coastal towns are quiet and cheap. Pack waterproof layers and check ferry timetables, which are reduced in winter. Many museums open only at weekends."),
    ("Electric vehicle charging explained", "Home chargers deliver seven to eleven kilowatts, while rapid public chargers can exceed one hundred. Charging speed slows as the battery fills. Cold weather reduces range noticeably."),
    ("Gardening on a balcony", "Choose compact varieties and containers with drainage holes. Herbs and cherry tomatoes thrive in sunny spots. Water in the evening to reduce evaporation during summer."),
    ("Understanding interest rates", "Central banks raise rates to cool inflation and cut them to support growth. Mortgage holders on variable deals feel changes first. Savers benefit when rates rise."),
    ("The history of lighthouses", "Lighthouses guided ships for centuries before satellite navigation. Keepers trimmed wicks and wound clockwork mechanisms through the night. Most lights are now automated."),
    ("How orchestras tune", "The oboe sounds a reference pitch and the other sections adjust in turn. Strings tune open strings while brass and woodwinds adjust slides and joints. Temperature affects pitch during a concert."),
    ("Running your first marathon", "Build mileage gradually over sixteen weeks and include one long run each week. Practice fuelling during training. Taper in the final fortnight to arrive rested."),
    ("A short guide to tide tables", "Tide tables list the times and heights of high and low water. Spring tides follow full and new moons. Local geography can delay the tide by hours."),
    ("Choosing a laptop for study", "Students need a comfortable keyboard, long battery life and enough memory for many browser tabs. A light machine is easier to carry between lectures. Extended warranties are rarely worth the cost."),
    ("Fermentation at home", "Cabbage, salt and time produce sauerkraut. Keep vegetables submerged under brine to prevent mould. Taste after a week and refrigerate when the flavour suits you."),
    ("The economics of ferries", "Ferry operators balance fuel costs, seasonal demand and port fees. Subsidies keep many island routes running in winter. New hybrid vessels cut emissions on short crossings."),
    ("Museum etiquette", "Most museums ask visitors not to touch exhibits and to switch off camera flash. Large bags may need to go to the cloakroom. Guided tours often reveal details missed by casual visitors."),
    ("How car factories are organised", "Modern plants split production into body shop, paint shop and final assembly. Robots handle welding while people fit interiors. Just-in-time delivery keeps parts stocks small."),
    ("Reading a company annual report", "Start with the chairman's letter, then the cash flow statement. Notes to the accounts explain one-off items. Compare several years to spot trends."),
    ("Designing a city square", "Successful squares offer seating, shade and reasons to linger such as cafes and markets. Traffic is kept to the edges. Trees soften hard paving and cool the air."),
    ("Book club discussion questions", "Ask which character changed most, what the title means and whether the ending satisfied. Compare the book with others by the same author. Rotate hosts to share the work."),
    ("Cycling in the rain", "Mudguards, bright lights and a breathable jacket make wet rides bearable. Brake earlier because stopping distances grow. Clean and oil the chain afterwards."),
    ("How regattas are scored", "Sailing regattas award points by finishing position, with the lowest total winning. Some series allow a boat to discard its worst race. Protests are heard by a jury after racing."),
    ("Planning a road trip", "Plot fuel or charging stops, book accommodation ahead in busy seasons and share the driving. Offline maps help where signal is weak. Build in rest days."),
    ("Choosing paint for steelwork", "Steel structures need primer, intermediate and top coats to resist corrosion. Surface preparation matters more than the paint itself. Coastal sites require heavier protection."),
    ("Writing a good cover letter", "Address the letter to a named person, show you understand the role and give evidence of results. Keep it to one page. Proofread twice."),
    ("An introduction to whaling history", "Coastal communities hunted whales for oil and bone for centuries. The trade declined as petroleum replaced whale oil. Museums now tell the story of the crews and their families."),
    ("Making a household budget", "List income and fixed costs first, then allocate the rest to savings and spending. Review the budget monthly. Automatic transfers make saving easier."),
    ("The role of a team principal in motorsport", "A team principal manages the racing operation, from drivers to engineers, and negotiates with sponsors. The role is distinct from the leadership of any road car company sharing the brand."),
    ("How translators work", "Literary translators balance accuracy with voice. They often correspond with the author and read widely in both languages. Deadlines for novels can stretch across years."),
    ("Harbour redevelopment projects", "Old industrial harbours are often converted into housing, offices and promenades. Projects must manage flood risk and keep space for working boats. Public consultation shapes the final plans."),
    ("Buying a used car", "Check service history, look for rust under the sills and run a history check on the registration. A test drive should include a cold start. Independent inspections are worth the fee."),
    ("Choosing running shoes", "Visit a specialist shop for gait analysis and try shoes late in the day when feet are larger. Replace shoes every eight hundred kilometres or so."),
    ("How to read a bus timetable", "Timetables list departure times at major stops; intermediate stops are estimates. Weekend and holiday services often differ. Real-time apps show delays."),
    ("Caring for wooden houses", "Painted timber needs a fresh coat every eight to ten years. Inspect for rot near the ground and around windows. Good gutters protect the walls."),
    ("The basics of cable-stayed design", "Cables run directly from towers to the deck, unlike suspension bridges where a main cable carries hangers. The design suits medium to long spans and is quick to build."),
    ("Starting a vegetable patch", "Pick a sunny site, improve the soil with compost and start with easy crops such as beans and lettuces. Rotate crops each year to limit pests."),
    ("Tips for writing letters by hand", "Use good paper, write a draft first and keep sentences short. A personal anecdote makes a letter memorable. Letters remain treasured long after emails are deleted."),
]


def main():
    rnd = random.Random(20240607)
    OUT.mkdir(parents=True, exist_ok=True)
    queries = []
    used_names = set()
    for i in range(34):
        cat = CATEGORIES[i % len(CATEGORIES)]
        stem = STEMS[i]
        name = cat["name"](stem, rnd)
        assert name not in used_names
        used_names.add(name)
        answer = cat["answer"](rnd)
        question = cat["question"](name)
        fillers = [f.format(n=name) for f in cat["filler"]]
        rnd.shuffle(fillers)
        paras = fillers[:2] + [cat["fact"](name, answer)] + fillers[2:]
        slug = name.lower().replace(" ", "-")
        planted = {
            "url": f"https://ledger.example/{cat['kind']}/{slug}",
            "title": f"{name}: profile",
            # Search snippets are query-biased: the engine shows the best-matching sentence.
            "snippet": cat["fact"](name, answer),
            "html": page_html(f"{name}: profile", paras, rnd),
            "last_updated": f"2024-0{1 + i % 9}-1{i % 10}T08:00:00Z",
            "flag": "relevant",
        }
        other = fillers[:]
        rnd.shuffle(other)
        second = {
            "url": f"https://archive.example/{cat['kind']}/{slug}/history",
            "title": f"A short history of {name}",
            "snippet": f"Archive notes on {name}.",
            "html": page_html(f"A short history of {name}", other[:3], rnd),
            "last_updated": f"2023-1{i % 3}-0{1 + i % 9}T12:00:00Z",
            "flag": "relevant",
        }
        decoy_person = f"{rnd.choice(FIRST)} {rnd.choice(LAST)}"
        negative = {
            "url": f"https://gossip.example/{cat['kind']}/{slug}/latest",
            "title": f"{name} in the news",
            "snippet": cat["negative"].format(n=name, x=decoy_person).split(". ")[0] + ".",
            "html": page_html(f"{name} in the news", [cat["negative"].format(n=name, x=decoy_person)], rnd),
            "last_updated": f"2024-1{i % 3}-2{i % 10}T18:30:00Z",
            "flag": "hard_negative",
        }
        queries.append({"query": question, "answer": answer, "pages": [planted, second, negative]})

    with open(OUT / "search.jsonl", "w") as f:
        for q in queries:
            f.write(json.dumps(q, ensure_ascii=False) + "\n")

    with open(OUT / "hard_negatives.jsonl", "w") as f:
        for k, (title, text) in enumerate(GENERIC):
            sentences = [s.strip() + "." for s in text.split(".") if s.strip()]
            page = {
                "url": f"https://generic.example/article/{k:03d}",
                "title": title,
                "snippet": sentences[0],
                "html": page_html(title, sentences, rnd),
                "last_updated": f"2022-0{1 + k % 9}-15T00:00:00Z",
                "flag": "hard_negative",
            }
            f.write(json.dumps(page, ensure_ascii=False) + "\n")

    # Difficulty labeling inputs: every third reference answer is wrong or a refusal.
    with open(OUT / "label_samples.jsonl", "w") as fs, open(OUT / "reference_answers.jsonl", "w") as fa:
        for k, q in enumerate(queries):
            sid = f"q{k:03d}"
            fs.write(json.dumps({"id": sid, "question": q["query"], "ground_truth": q["answer"]}) + "\n")
            ref = q["answer"] if k % 3 != 2 else ("I don't know" if k % 2 else "someone else")
            fa.write(json.dumps({"id": sid, "answer": ref}) + "\n")

    write_eval_fixtures(OUT.parent / "eval")


def write_eval_fixtures(out):
    """Pre-judged label files and a small multi-turn responses file for `curriq eval`."""
    out.mkdir(parents=True, exist_ok=True)

    def label_file(name, counts):
        with open(out / name, "w") as f:
            k = 0
            for label, n in counts:
                for _ in range(n):
                    f.write(json.dumps({"conversation_id": f"c{k:04d}", "turn": 0, "label": label}) + "\n")
                    k += 1

    # perfect / missing / incorrect fractions out of 1000
    label_file("labels_no_curriculum.jsonl", [("perfect", 197), ("missing", 85), ("incorrect", 718)])
    label_file("labels_curriculum.jsonl", [("perfect", 262), ("missing", 237), ("incorrect", 501)])
    label_file("labels_all_missing.jsonl", [("missing", 20)])

    rows = [
        # P, I, I, P: the last turn is cut off after two Incorrect in a row -> -0.25
        ("bridge", 0, "How long is the Calder Bridge?", "It is 840 metres long.", "840 metres"),
        ("bridge", 1, "Who designed it?", "Oskar Lind.", "Mara Ekdahl"),
        ("bridge", 2, "When did it open?", "In 1950.", "1961"),
        ("bridge", 3, "What river does it cross?", "The Calder.", "Calder"),
        # M, P -> 0.5
        ("mayor", 0, "Who is the mayor of Halvardhaven?", "I don't know.", "Ines Brandt"),
        ("mayor", 1, "Which party is she from?", "The Harbour Party.", "Harbour Party"),
    ]
    with open(out / "multiturn_responses.jsonl", "w") as f:
        for cid, turn, question, response, truth in rows:
            f.write(json.dumps({"conversation_id": cid, "turn": turn, "question": question,
                                "response": response, "ground_truth": truth}) + "\n")


if __name__ == "__main__":
    main()
