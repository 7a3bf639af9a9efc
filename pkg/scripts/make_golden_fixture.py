"""Regenerate the bundled golden replay fixture (task + transcript)."""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "golden"

TABLE = {
    "columns": ["#", "Player", "Goals", "Caps", "Career"],
    "rows": [
        ["1", "Landon Donovan", "57", "155", "2000-present"],
        ["2", "Clint Dempsey", "36", "103", "2004-present"],
        ["3", "Eric Wynalda", "34", "106", "1990-2000"],
        ["4", "Brian McBride", "30", "95", "1993-2006"],
        ["5", "Joe-Max Moore", "24", "100", "1992-2002"],
        ["6T", "Jozy Altidore", "21", "67", "2007-present"],
        ["6T", "Bruce Murray", "21", "86", "1985-1993"],
        ["8", "Eddie Johnson", "19", "62", "2004-present"],
        ["9T", "Earnie Stewart", "17", "101", "1990-2004"],
        ["9T", "DaMarcus Beasley", "17", "114", "2001-present"],
    ],
}

QUESTION = "who was the top goalscorer previous to landon donovan?"

TASK = {
    "id": "nu-2024",
    "table": TABLE,
    "question": QUESTION,
    "answers": ["Eric Wynalda"],
    "task_kind": "qa",
}

FILTERED_TABLE = "\n".join(
    [
        "| # | Player | Goals | Caps | Career |",
        "| --- | --- | --- | --- | --- |",
        "| 3 | Eric Wynalda | 34 | 106 | 1990-2000 |",
        "| 4 | Brian McBride | 30 | 95 | 1993-2006 |",
        "| 5 | Joe-Max Moore | 24 | 100 | 1992-2002 |",
        "| 6T | Bruce Murray | 21 | 86 | 1985-1993 |",
        "| 9T | Earnie Stewart | 17 | 101 | 1990-2004 |",
    ]
)

SOLVER_0 = """Thought: To find the top goalscorer before Landon Donovan, I need to identify the player with the most goals scored, excluding Landon Donovan. Since the table is already sorted by the number of goals in descending order, I can look at the second row to find the player with the next highest number of goals.
Action: Identify the player with the second-highest number of goals
Intermediate table: <NOT CHANGED>
Answer: Clint Dempsey"""

CHECKER_0 = """Answer Type Checking
Score: 2
Comments: The question asks for a player's name, and the answer is a player's name, so the type matches correctly.

Format Validation
Score: 2
Comments: The answer is a single player's name, which follows the expected format for this type of question.

Evidence Grounding
Score: 0
Comments: According to the table, 'previous to' asks about time, not rank. Clint Dempsey has 36 goals but his career started in 2004; considering the question's phrasing, the top scorer before Donovan's emergence would be Eric Wynalda, making Dempsey not the correct answer under the 'previous to' interpretation.

Summary
Total Score: 4
Final Comments: The answer is incorrect because, based on the logical interpretation of 'previous to Landon Donovan', the correct top goalscorer before Donovan would likely be Eric Wynalda, given the context and data provided in the table."""

REFLECTOR_0 = """Diagnosis: The reasoner incorrectly identified Clint Dempsey as the top goalscorer before Landon Donovan. The mistake lies in the interpretation of 'previous to', which implies considering the time or emergence of players, not just the next highest goal count. The reasoner should have considered the career span and goals of players who were active before or alongside Donovan's early career.
Improvement plan: Re-evaluate the question's phrasing and the table's data. Identify players who were active before Landon Donovan's emergence or during his early career, then determine which of these players had the highest number of goals. Considering Eric Wynalda's career span (1990-2000) and goal count (34), he would be a more appropriate answer under the 'previous to' criteria."""

SOLVER_1 = f"""Thought: The question asks for the top goalscorer previous to Landon Donovan. The Reflector result indicates that I should consider the career span and goals of players who were active before or alongside Donovan's early career. Landon Donovan's career started in 2000. I need to identify players who were active before 2000 and find the one with the highest number of goals.
Action: Filter players whose career ended before 2000 or started before 2000, then find the maximum goals among them
Intermediate table:
{FILTERED_TABLE}
Answer: <NOT READY>"""

SOLVER_2 = """Thought: The Reflector result indicates that I should consider players who were active before or during Landon Donovan's early career. Given the 'previous to' criteria, I need to identify the top goalscorer among players whose career span ended before or overlapped with Donovan's emergence. Eric Wynalda's career (1990-2000) and high goal count (34) make him a strong candidate.
Action: Identify top goalscorer among players active before or during Landon Donovan's early career
Intermediate table: <NOT CHANGED>
Answer: Eric Wynalda"""

CHECKER_1 = """Answer Type Checking
Score: 2
Comments: The question asks for a player's name, and the answer is a name, which matches the expected type.

Format Validation
Score: 2
Comments: The answer is a single player's name, which follows the expected format for this type of question.

Evidence Grounding
Score: 2
Comments: According to the table, before Landon Donovan, Eric Wynalda was indeed the top goalscorer with 34 goals, which is less than Donovan's 57 but more than the others below him in the list.

Summary
Total Score: 6
Final Comments: The answer is correct in terms of type, format, and evidence grounding. Eric Wynalda is the player with the most goals before Landon Donovan, making the response accurate."""

ARCHIVER_SUM_0 = """Question Type: lookup
Required Operations: ['filter', 'compare', 'identify max']
Context: This question requires identifying the top goalscorer before Landon Donovan's time, involving filtering players based on their career timeline and comparing their goal scores. The correct answer, Eric Wynalda, is determined by having the highest number of goals among players whose careers significantly predated or overlapped with Donovan's start in 2000.
Keywords: ['filter by time', 'compare scores', 'max goals']
Tags: ['lookup', 'sports data', 'goalscorer', 'career timeline']
Correct Steps: ["Identify players with careers before or overlapping Landon Donovan's start in 2000", 'Among these players, find the one with the highest number of goals', 'Return the name of this top goalscorer']
Wrong Steps: [ ]
Error Type: none
Error Reason: none"""

ARCHIVER_EVO_0 = """Should Evolve: false
Actions: [ ]
Suggested Connections: [ ]
Tags to Update: [ ]
New Context Neighborhood: [ ]
New Tags Neighborhood: [ ]"""

ENTRIES = [
    ("solver", 0, SOLVER_0),
    ("checker", 0, CHECKER_0),
    ("reflector", 0, REFLECTOR_0),
    ("solver", 1, SOLVER_1),
    ("solver", 2, SOLVER_2),
    ("checker", 1, CHECKER_1),
    ("archiver_sum", 0, ARCHIVER_SUM_0),
    ("archiver_evo", 0, ARCHIVER_EVO_0),
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "task.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(TASK, ensure_ascii=False) + "\n")
    with open(OUT / "transcript.jsonl", "w", encoding="utf-8") as fh:
        for role, index, response in ENTRIES:
            fh.write(
                json.dumps(
                    {"role": role, "index": index, "response": response},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"wrote {OUT / 'task.jsonl'} and {OUT / 'transcript.jsonl'}")


if __name__ == "__main__":
    main()
