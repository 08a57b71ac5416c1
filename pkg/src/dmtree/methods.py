"""Method descriptors: a learner name plus fully resolved parameters.

Descriptors are written ``name`` or ``name:key=value,key=value``, e.g.
``dmt:k=7,scheme=laplace`` or ``bagging:members=50``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from dmtree.baselines import (
    RandomSplitParams,
    build_adaboost,
    build_bagging,
    build_random_forest,
    build_random_tree_ensemble,
)
from dmtree.dataset import Dataset
from dmtree.dmt import SCHEMES, build_dmt
from dmtree.tree import TreeParams, build_tree

_TREE_DEFAULTS = {"min_leaf": 2, "confidence": 0.25}
DEFAULTS: dict[str, dict] = {
    "c45": dict(_TREE_DEFAULTS),
    "majority": {},
    "dmt": {"k": 7, "scheme": "simple", "support_literal": False, **_TREE_DEFAULTS},
    "bagging": {"members": 100, **_TREE_DEFAULTS},
    "adaboost": {"rounds": 100, **_TREE_DEFAULTS},
    "random_forest": {"members": 100, "subset": None, "min_leaf": 1, "confidence": 1.0},
    "random_tree": {"members": 100, "pool": 20, **_TREE_DEFAULTS},
}
ALIASES = {
    "c4.5": "c45", "stump": "majority", "zero-r": "majority", "tree": "c45", "j48": "c45",
    "bag": "bagging", "ada": "adaboost", "boosting": "adaboost", "adaboostm1": "adaboost",
    "rf": "random_forest", "random-forest": "random_forest",
    "rt": "random_tree", "random-tree": "random_tree", "random_trees": "random_tree",
}
_SHORT = {"c45": "C4.5", "majority": "Majority", "bagging": "Bag", "adaboost": "Ada", "random_forest": "RF", "random_tree": "RT"}


class MethodError(ValueError):
    pass


def _coerce(key: str, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    if key in ("scheme",):
        return raw
    if key == "support_literal":
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise MethodError(f"support_literal expects a boolean, got {raw!r}")
    if raw.lower() in ("none", "auto", ""):
        return None
    try:
        return float(raw) if key == "confidence" else int(raw)
    except ValueError:
        raise MethodError(f"parameter {key} expects a number, got {raw!r}") from None


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def create(cls, name: str, **overrides) -> "MethodSpec":
        key = ALIASES.get(name.lower(), name.lower())
        if key not in DEFAULTS:
            raise MethodError(f"unknown method {name!r}; choose from {sorted(DEFAULTS)}")
        params = dict(DEFAULTS[key])
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in params:
                raise MethodError(f"method {key} has no parameter {k!r}")
            params[k] = _coerce(k, v)
        spec = cls(key, params)
        spec.validate()
        return spec

    @classmethod
    def parse(cls, text: str, **overrides) -> "MethodSpec":
        name, _, rest = text.partition(":")
        inline = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            k, eq, v = item.partition("=")
            if not eq:
                raise MethodError(f"expected key=value in method descriptor, got {item!r}")
            inline[k.strip()] = v.strip()
        merged = {k: v for k, v in overrides.items() if v is not None}
        merged.update(inline)
        return cls.create(name.strip(), **merged)

    def validate(self) -> None:
        p = self.params
        for key in ("k", "members", "rounds", "pool", "min_leaf"):
            if key in p and (not isinstance(p[key], int) or p[key] < 1):
                raise MethodError(f"{key} must be an integer >= 1, got {p[key]!r}")
        if p.get("subset") is not None and p["subset"] < 1:
            raise MethodError("subset must be >= 1")
        if "confidence" in p and not 0 < p["confidence"] <= 1:
            raise MethodError("confidence must be in (0, 1]")
        if "scheme" in p and p["scheme"] not in SCHEMES:
            raise MethodError(f"scheme must be one of {SCHEMES}, got {p['scheme']!r}")

    def __str__(self) -> str:
        return self.name + ":" + ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))

    @property
    def label(self) -> str:
        if self.name == "dmt":
            base = f"{self.params['k']}-DMT"
            return base if self.params["scheme"] == "simple" else f"{base}/{self.params['scheme']}"
        return _SHORT[self.name]

    def tree_params(self) -> TreeParams:
        return TreeParams(self.params["min_leaf"], self.params["confidence"])

    def fit(self, d: Dataset, seed: int = 0):
        p = self.params
        if self.name == "majority":
            # a single leaf predicting the prior-majority class
            return build_tree(d, TreeParams(), candidate_attrs=[])
        tp = self.tree_params()
        if self.name == "c45":
            return build_tree(d, tp)
        if self.name == "dmt":
            return build_dmt(d, p["k"], tp, p["scheme"], p["support_literal"])
        if self.name == "bagging":
            return build_bagging(d, p["members"], tp, seed)
        if self.name == "adaboost":
            return build_adaboost(d, p["rounds"], tp, seed)
        if self.name == "random_forest":
            return build_random_forest(d, p["members"], RandomSplitParams(p["subset"]), tp, seed)
        return build_random_tree_ensemble(d, p["members"], RandomSplitParams(top_k_pool=p["pool"]), tp, seed)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def model_tree_sizes(model) -> list[int]:
    if hasattr(model, "trees"):
        return [t.size for t in model.trees]
    if hasattr(model, "members"):
        return [t.size for t in model.members]
    return [model.size]
