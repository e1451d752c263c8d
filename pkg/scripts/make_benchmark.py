#!/usr/bin/env python3
"""Regenerate the desk-scale benchmark fixture: 148 instances stratified into
58 question-level, 60 task-level, and 30 project-level entries, including the
P68871 premise-error case. Deterministic; no RNG."""

import itertools
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from protlab.evolve import WildTypeMismatch, check_wild_type, format_premise_error

OUT_DIR = Path(__file__).resolve().parents[1] / "fixtures" / "benchmark"

# Human hemoglobin subunit beta; residue 113 is Cysteine.
P68871 = (
    "MVHLTPEEKSAVTALWGKVNVDEVGGEALGRLLVVYPWTQRFFESFGDLSTPDAVMGNPK"
    "VKAHGKKVLGAFSDGLAHLDNLKGTFATLSELHCDKLHVDPENFRLLGNVLVCVLAHHFG"
    "KEFTPPVQAAYQKVVAGVANALAHKYH"
)

ACCESSIONS = [
    "P04040", "P69905", "P68871", "P00734", "P02768", "P04637", "P00722",
    "P19821", "P0DP23", "P61626", "Q9Y6K9", "Q9H0H5", "P00918", "P05067",
    "P38398", "P01308", "P62593", "P10275", "P00549", "P13700",
]
PROPERTIES = [
    "Solubility", "Stability", "Subcellular Localization", "Membrane Protein",
    "Metal Ion Binding", "Optimal Temperature", "Optimal PH", "Kcat",
]
SITES = ["Activity Site", "Binding Site", "Conserved Site", "Motif"]
MUTATIONS = ["A12R", "G105S", "K45A", "T89A", "F22Y", "R15H", "L106I", "M134K"]

QUESTION_TEMPLATES = [
    "Predict the {prop} of the protein with accession {acc}.",
    "Retrieve {acc} and report its {site} residues.",
    "Does the mutation {mut} in {acc} raise or lower predicted stability?",
    "Fetch the predicted structure for {acc} and summarize its confidence.",
    "Report the physicochemical profile (weight, pI, hydropathy) of {acc}.",
]
TASK_TEMPLATES = [
    "Download the sequence for {acc}, apply the mutation {mut}, and predict the mutant's {prop}.",
    "Retrieve {acc}, identify its {site} residues, and propose one substitution predicted to improve {prop}.",
    "Fetch the predicted structure for {acc}, extract its sequence, and rank the five most stabilizing single substitutions.",
    "For {acc}, run a saturation scan at position 20 and list the top five stabilizing and top three destabilizing substitutions.",
]
PROJECT_TEMPLATES = [
    "Starting from {acc} as the seed, mine homologs, screen them for {prop} and solubility, and compile a ranked discovery report.",
    "Design a combinatorial library for {acc}: scan singles, fit an additive model on the measured subset, and recommend the best double and quadruple variants.",
    "Build a predictor for {prop} from a public dataset, register it as a tool, and apply it to {acc} with an audited report.",
]


def cycle_fill(templates, count, prefix):
    acc = itertools.cycle(ACCESSIONS)
    prop = itertools.cycle(PROPERTIES)
    site = itertools.cycle(SITES)
    mut = itertools.cycle(MUTATIONS)
    out = []
    for i in range(count):
        template = templates[i % len(templates)]
        accession = next(acc)
        query = template.format(acc=accession, prop=next(prop), site=next(site), mut=next(mut))
        constraints = [{"kind": "contains-string", "value": accession}]
        if i % 3 == 0:
            constraints.append({"kind": "cites-at-least", "n": 1})
        if i % 5 == 0:
            constraints.append(
                {"kind": "numeric-field-within", "field": "confidence", "value": 0.9, "tol": 0.1}
            )
        out.append(
            {
                "id": f"{prefix}{i + 1:03d}",
                "tier": {"q": "question", "t": "task", "p": "project"}[prefix],
                "query": query,
                "context": {"accession": accession},
                "constraints": constraints,
            }
        )
    return out


def premise_error_instance():
    try:
        check_wild_type(P68871, 113, "A")
    except WildTypeMismatch as exc:
        assert exc.expected == "C" and exc.found == "A"
        report_line = format_premise_error("P68871", exc)
    return (
        {
            "id": "q058",
            "tier": "question",
            "query": "What is the most conservative substitution at the 113A site of the P68871 protein?",
            "context": {"accession": "P68871", "sequence": P68871, "claimed_site": "113A"},
            "constraints": [
                {"kind": "contains-string", "value": "Cysteine"},
                {"kind": "contains-string", "value": "premise error"},
            ],
        },
        report_line,
    )


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    questions = cycle_fill(QUESTION_TEMPLATES, 57, "q")
    premise, report_line = premise_error_instance()
    questions.append(premise)
    tasks = cycle_fill(TASK_TEMPLATES, 60, "t")
    projects = cycle_fill(PROJECT_TEMPLATES, 30, "p")
    instances = questions + tasks + projects
    assert len(instances) == 148

    with (OUT_DIR / "instances.jsonl").open("w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst, sort_keys=True) + "\n")

    report = {
        "text": report_line
        + " The conservative-substitution analysis applies to Cysteine 113, "
        "not Alanine; rerun with the corrected site if a C113 scan is wanted.",
        "artifact": {"success": True, "premise_error": True, "position": 113,
                     "expected": "C", "claimed": "A"},
        "files": [],
        "citations": [],
    }
    (OUT_DIR / "premise_error_report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"wrote {OUT_DIR / 'instances.jsonl'} (148 instances) and premise_error_report.json")


if __name__ == "__main__":
    main()
