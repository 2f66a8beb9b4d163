#!/usr/bin/env python3
"""Regenerates the golden rendered prompts from the template files.

Deliberately independent of the C++ renderer: it slices the checked-in
templates and substitutes labels with plain string operations, so the golden
bytes are derived straight from templates/ and not from the code under test.
"""
import pathlib

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = pathlib.Path(__file__).resolve().parent

SEP = "\n\n==\n\nQuery: "
ANS = "\n\nAnswer: "

MULTICLASS_ORDER = [
    "benign", "porn", "surrogacy", "gambling", "drug", "data-theft",
    "money-laundry", "counterfeit", "advertisement", "weapon", "fraud",
    "hacking", "others",
]

BINARY_DEMOS = [
    ("Buy top quality replica watches, contact telegram @repwatch", "illicit"),
    ("Weekend farmers market opens at 9am near the station", "benign"),
]
BINARY_QUERY = "Cheap essay writing service, guaranteed grades"

MULTI_DEMOS = [
    ("Pills shipped discreetly worldwide, no prescription needed", "drug"),
    ("Weekend farmers market opens at 9am near the station", "benign"),
]
MULTI_QUERY = "Win big tonight, roulette and slots, instant payout"


def head_of(template: str) -> str:
    return template[: template.index(SEP)]


def swap_quoted(text: str, mapping: dict) -> str:
    out = []
    i = 0
    while i < len(text):
        matched = False
        if text[i] == "'":
            for src, dst in mapping.items():
                pat = "'" + src + "'"
                if text.startswith(pat, i):
                    out.append("'" + dst + "'")
                    i += len(pat)
                    matched = True
                    break
        if not matched:
            out.append(text[i])
            i += 1
    return "".join(out)


def render(head: str, demos, query: str) -> str:
    parts = [head]
    for text, label in demos:
        parts.append(SEP + text + ANS + label)
    parts.append(SEP + query + ANS)
    return "".join(parts)


def write(name: str, content: str) -> None:
    (OUT / name).write_bytes(content.encode("utf-8"))


def main() -> None:
    binary = (ROOT / "templates" / "binary_prompt.txt").read_text(encoding="utf-8")
    multi = (ROOT / "templates" / "multiclass_prompt.txt").read_text(encoding="utf-8")
    bhead, mhead = head_of(binary), head_of(multi)

    write("binary_k0.txt", render(bhead, [], BINARY_QUERY))
    write("binary_k2.txt", render(bhead, BINARY_DEMOS, BINARY_QUERY))
    write("binary_k2_nolabel.txt",
          render(bhead, [(t, "") for t, _ in BINARY_DEMOS], BINARY_QUERY))

    inverted_head = swap_quoted(bhead, {"benign": "illicit", "illicit": "benign"})
    inverted_demos = [(t, "benign" if l == "illicit" else "illicit")
                      for t, l in BINARY_DEMOS]
    write("binary_k2_inverted.txt", render(inverted_head, inverted_demos, BINARY_QUERY))

    abstract_head = swap_quoted(bhead, {"benign": "0", "illicit": "1"})
    abstract_demos = [(t, "1" if l == "illicit" else "0") for t, l in BINARY_DEMOS]
    write("binary_k2_abstract.txt", render(abstract_head, abstract_demos, BINARY_QUERY))

    write("multiclass_k0.txt", render(mhead, [], MULTI_QUERY))
    write("multiclass_k2.txt", render(mhead, MULTI_DEMOS, MULTI_QUERY))

    index = {name: str(i) for i, name in enumerate(MULTICLASS_ORDER)}
    mc_abstract_head = swap_quoted(mhead, index)
    mc_abstract_demos = [(t, index[l]) for t, l in MULTI_DEMOS]
    write("multiclass_k2_abstract.txt", render(mc_abstract_head, mc_abstract_demos, MULTI_QUERY))


if __name__ == "__main__":
    main()
