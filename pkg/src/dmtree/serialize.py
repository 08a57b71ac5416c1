"""Plain-text model files.

A model file is a header of ``key <json value>`` lines followed by one
section per tree, each opened by ``tree nodes=<n>``. See ``docs/formats.md``
for the full grammar.
"""

from __future__ import annotations

import json
from pathlib import Path

from dmtree.dataset import AttributeSchema, write_atomic

MAGIC = "dmtree-model 1"


def header_lines(schema, classes, priors, **extra) -> list[str]:
    lines = [MAGIC]
    for key, value in extra.items():
        lines.append(f"{key} {json.dumps(value)}")
    lines.append(f"classes {json.dumps(list(classes))}")
    lines.append(f"priors {json.dumps([float(p) for p in priors])}")
    for a in schema:
        entry = {"name": a.name, "kind": a.kind}
        if a.categories:
            entry["categories"] = list(a.categories)
        lines.append(f"attribute {json.dumps(entry)}")
    return lines


def parse_header(lines: list[str]) -> tuple[dict, list[str]]:
    if not lines or lines[0].strip() != MAGIC:
        raise ValueError(f"not a model file (expected first line {MAGIC!r})")
    header: dict = {}
    schema = []
    i = 1
    while i < len(lines) and not lines[i].startswith("tree "):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        key, _, value = line.partition(" ")
        decoded = json.loads(value)
        if key == "attribute":
            schema.append(AttributeSchema(decoded["name"], decoded["kind"], tuple(decoded.get("categories", ()))))
        else:
            header[key] = decoded
    header["schema"] = tuple(schema)
    header["classes"] = tuple(header.get("classes", ()))
    header["priors"] = tuple(header.get("priors", ()))
    return header, [ln for ln in lines[i:] if ln.strip()]


def split_tree_sections(body: list[str]) -> list[list[str]]:
    sections: list[list[str]] = []
    for line in body:
        if line.startswith("tree "):
            sections.append([line])
        elif sections:
            sections[-1].append(line)
        else:
            raise ValueError(f"line outside any tree section: {line!r}")
    return sections


def model_to_text(model) -> str:
    return model.to_text()


def model_from_text(text: str):
    """Load any model kind written by :func:`save_model`."""
    from dmtree.baselines import EnsembleModel
    from dmtree.dmt import DmtModel
    from dmtree.tree import tree_from_text

    header, _ = parse_header(text.splitlines())
    kind = header.get("kind", "tree")
    if kind == "dmt":
        return DmtModel.from_text(text)
    if kind in ("bagging", "adaboost", "random_forest", "random_tree"):
        return EnsembleModel.from_text(text)
    if kind == "tree":
        return tree_from_text(text)
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    write_atomic(path, model.to_text())


def load_model(path):
    return model_from_text(Path(path).read_text(encoding="utf-8"))
