"""Series composition of effects with one flat normalized parameter vector.

A chain is an ordered list of stages; each stage names a registry effect and
may pin some of its parameters to fixed normalized values. The remaining
(free) parameters of all stages concatenate, in stage order and descriptor
order, into a single vector in [0, 1]^P that the optimizer searches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer
from .effects import (
    EffectDescriptor,
    UnknownEffectError,
    get_descriptor,
    map_param,
    process_effect,
)


class ChainError(Exception):
    pass


class ChainSpecError(ChainError):
    """Malformed chain-spec text; message carries the line number."""


@dataclass(frozen=True)
class ChainStage:
    effect_id: str
    fixed: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        desc = get_descriptor(self.effect_id)
        names = {p.name for p in desc.params}
        for name in self.fixed:
            if name not in names:
                raise ChainError(f"{self.effect_id}: no parameter {name!r}")


@dataclass(frozen=True)
class Chain:
    stages: tuple[ChainStage, ...]

    def __post_init__(self):
        if len(self.stages) < 1:
            raise ChainError("chain needs at least one stage")
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def descriptors(self) -> list[EffectDescriptor]:
        return [get_descriptor(s.effect_id) for s in self.stages]

    def free_params(self) -> list[tuple[int, str]]:
        """(stage index, param name) for every free parameter, in phi order."""
        layout = []
        for i, (stage, desc) in enumerate(zip(self.stages, self.descriptors)):
            for spec in desc.params:
                if spec.name not in stage.fixed:
                    layout.append((i, spec.name))
        return layout

    @property
    def num_params(self) -> int:
        return len(self.free_params())


def parse_chain_spec(text: str) -> Chain:
    """Parse the chain-spec format: `effect <id>` / `fix <param> <value>` lines."""
    stages: list[tuple[str, dict[str, float]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "effect":
            if len(tokens) != 2:
                raise ChainSpecError(f"line {lineno}: expected `effect <id>`")
            try:
                get_descriptor(tokens[1])
            except UnknownEffectError:
                raise ChainSpecError(
                    f"line {lineno}: unknown effect {tokens[1]!r}"
                ) from None
            stages.append((tokens[1], {}))
        elif tokens[0] == "fix":
            if len(tokens) != 3:
                raise ChainSpecError(f"line {lineno}: expected `fix <param> <value>`")
            if not stages:
                raise ChainSpecError(f"line {lineno}: `fix` before any `effect`")
            effect_id, fixed = stages[-1]
            desc = get_descriptor(effect_id)
            if tokens[1] not in {p.name for p in desc.params}:
                raise ChainSpecError(
                    f"line {lineno}: {effect_id} has no parameter {tokens[1]!r}"
                )
            try:
                value = float(tokens[2])
            except ValueError:
                raise ChainSpecError(
                    f"line {lineno}: bad value {tokens[2]!r}"
                ) from None
            if not 0.0 <= value <= 1.0:
                raise ChainSpecError(f"line {lineno}: value must be in [0, 1]")
            fixed[tokens[1]] = value
        else:
            raise ChainSpecError(f"line {lineno}: unknown directive {tokens[0]!r}")
    if not stages:
        raise ChainSpecError("chain spec defines no effects")
    return Chain(tuple(ChainStage(eid, fixed) for eid, fixed in stages))


def split_params(chain: Chain, phi) -> list[np.ndarray]:
    """Split the flat free-parameter vector into per-stage pieces."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (chain.num_params,):
        raise ChainError(
            f"expected {chain.num_params} parameters, got shape {phi.shape}"
        )
    pieces = []
    pos = 0
    for stage, desc in zip(chain.stages, chain.descriptors):
        n_free = sum(1 for p in desc.params if p.name not in stage.fixed)
        pieces.append(phi[pos : pos + n_free])
        pos += n_free
    return pieces


def stage_vectors(chain: Chain, phi) -> list[np.ndarray]:
    """Full per-stage normalized vectors with fixed overrides injected."""
    pieces = split_params(chain, phi)
    vectors = []
    for stage, desc, free in zip(chain.stages, chain.descriptors, pieces):
        values = np.empty(desc.num_params)
        it = iter(free)
        for j, spec in enumerate(desc.params):
            if spec.name in stage.fixed:
                values[j] = stage.fixed[spec.name]
            else:
                values[j] = next(it)
        vectors.append(values)
    return vectors


def process_chain(chain: Chain, x: AudioBuffer, phi) -> AudioBuffer:
    """Apply all stages in series; output length equals input length."""
    out = x
    for stage, values in zip(chain.stages, stage_vectors(chain, phi)):
        out = process_effect(stage.effect_id, out, values)
    return out


def physical_view(chain: Chain, phi) -> list[tuple[int, str, str, float]]:
    """(stage index, effect_id, param name, physical value) for free params."""
    rows = []
    pieces = split_params(chain, phi)
    for i, (stage, desc, free) in enumerate(
        zip(chain.stages, chain.descriptors, pieces)
    ):
        specs = [p for p in desc.params if p.name not in stage.fixed]
        for spec, v in zip(specs, free):
            rows.append((i, stage.effect_id, spec.name, map_param(v, spec)))
    return rows
