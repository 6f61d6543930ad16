"""Deterministic standard-normal noise for ``[M DW^n]`` terms."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from typing import Literal

import numpy as np

from src.morphgen.frontend.ast import Expr, Noise
from src.morphgen.sema.tree import walk

logger = logging.getLogger(__name__)

DwInterpretation = Literal["difference", "sde"]


class NoisePlan:
    """Assigns every noise term a site and draws its samples per step.

    Samples for one ``(site, step)`` come from their own ``SeedSequence`` child of the master seed,
    so they do not depend on evaluation order or on how many workers evaluate the step.

    Args:
        seed: Master seed.
        dt: Step size, used by the ``sde`` interpretation.
        interpretation: ``difference`` adds ``M * xi`` to the rate; ``sde`` adds
            ``M * xi / sqrt(dt)`` so the Euler update contributes ``M * xi * sqrt(dt)``.
    """

    def __init__(
        self, seed: int, dt: float = 1.0, interpretation: DwInterpretation = "difference"
    ):
        if interpretation not in ("difference", "sde"):
            raise ValueError(f"unknown DW interpretation '{interpretation}'")
        self.seed = int(seed)
        self.interpretation = interpretation
        self.scale = 1.0 if interpretation == "difference" else 1.0 / math.sqrt(dt)
        self._sites: dict[int, int] = {}

    def register(self, expressions: Iterable[Expr]) -> None:
        """Number the noise terms of the given expressions in traversal order."""
        for expr in expressions:
            for node in walk(expr):
                if isinstance(node, Noise) and id(node) not in self._sites:
                    self._sites[id(node)] = len(self._sites)
        logger.debug(f"Noise plan has {len(self._sites)} sites, seed {self.seed}")

    def site(self, node: Noise) -> int:
        if id(node) not in self._sites:
            self._sites[id(node)] = len(self._sites)
        return self._sites[id(node)]

    def samples(self, site: int, step: int, shape: tuple[int, ...]) -> np.ndarray:
        """Standard-normal samples of ``shape`` for one site and step."""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(site, step))
        return np.random.default_rng(sequence).standard_normal(shape)

    def sample(
        self, node: Noise, step: int, weight: float | np.ndarray, shape: tuple[int, ...]
    ) -> np.ndarray:
        """Weighted samples for a noise term.

        A scalar weight multiplies ``arity`` samples (one per component). A vector weight with
        arity 1 scales one sample per cell to a vector; with arity 2 it is dotted with the two
        samples to a scalar.
        """
        xi = self.samples(self.site(node), step, (node.arity, *shape)) * self.scale
        if np.ndim(weight) > len(shape):
            if node.arity == 2:
                return weight[0] * xi[0] + weight[1] * xi[1]
            return weight * xi[0]
        return weight * (xi[0] if node.arity == 1 else xi)
