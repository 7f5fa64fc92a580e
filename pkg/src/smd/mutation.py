"""Masked Gaussian mutation algebra for flat parameter genomes.

Masks are 0/1 uint8 vectors (1 = parameter mutated, 0 = frozen). `rho` is
the expected FROZEN fraction throughout the package: a mask bit is 1 with
probability (1 - rho), so rho = 0.9 mutates roughly 10% of parameters.

Noise vectors are quantized to float32-representable values. Parents
loaded from checkpoints are float32-valued too, so sums theta +- gamma of
two 24-bit significands are exact in float64 arithmetic: mirrored pairs
cancel exactly and frozen coordinates stay bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .network import ParamVector

SUBSPACE_MODES = ("static", "dynamic")

# Spawn-key namespaces for per-purpose seed derivation.
_MASK_NS = 0
_NOISE_NS = 1


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable 64-bit seed for (master_seed, key...).

    Counter-based: every consumer derives its own stream, so results do
    not depend on evaluation order or worker count.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class MutationParams:
    """Child-generation distribution: N(mu, sigma^2) noise restricted to a
    Bernoulli(1 - rho) support, plus the subspace and sampling strategy."""

    sigma: float
    rho: float
    mu: float = 0.0
    subspace_mode: str = "dynamic"
    mirrored: bool = True
    anti_random: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.subspace_mode not in SUBSPACE_MODES:
            raise ConfigurationError(
                f"subspace_mode must be one of {SUBSPACE_MODES}, got {self.subspace_mode!r}"
            )


@dataclass
class SparseMutation:
    """Realized sparse perturbation gamma = noise * mask."""

    gamma: np.ndarray
    mask: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.gamma.shape != self.mask.shape:
            raise ShapeError(f"gamma {self.gamma.shape} vs mask {self.mask.shape}")
        if np.any(self.gamma[self.mask == 0] != 0.0):
            raise ConfigurationError("gamma must be exactly zero off the mask support")


def sample_mask(w: int, rho: float, seed: int) -> np.ndarray:
    """Bernoulli mask of length w; each bit is 1 with probability 1 - rho."""
    if not 0.0 <= rho < 1.0:
        raise ConfigurationError(f"rho must lie in [0, 1), got {rho}")
    if w < 1:
        raise ConfigurationError("w must be positive")
    rng = np.random.default_rng(seed)
    return (rng.random(w) >= rho).astype(np.uint8)


def complement(mask: np.ndarray) -> np.ndarray:
    """Anti-random mask: every bit flipped."""
    mask = np.asarray(mask, dtype=np.uint8)
    return (1 - mask).astype(np.uint8)


def partition_masks(w: int, n_parts: int, seed: int) -> list[np.ndarray]:
    """n_parts pairwise-disjoint masks whose union covers every index.

    Each index is assigned uniformly at random to one part.
    """
    if n_parts < 1:
        raise ConfigurationError("n_parts must be positive")
    if n_parts > w:
        raise ConfigurationError(f"cannot split {w} parameters into {n_parts} parts")
    assign = np.random.default_rng(seed).integers(0, n_parts, size=w)
    return [(assign == p).astype(np.uint8) for p in range(n_parts)]


def sample_noise(w: int, mu: float, sigma: float, seed: int) -> np.ndarray:
    """I.i.d. Gaussian noise vector, quantized to float32 values.

    The quantization (relative error ~6e-8) keeps theta +- noise exact in
    float64 for float32-valued parents; see module docstring.
    """
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    if w < 1:
        raise ConfigurationError("w must be positive")
    rng = np.random.default_rng(seed)
    return rng.normal(mu, sigma, size=w).astype(np.float32).astype(np.float64)


def compose(noise: np.ndarray, mask: np.ndarray, seed: int = 0) -> SparseMutation:
    """Hadamard product of noise and mask."""
    noise = np.asarray(noise, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.uint8)
    if noise.shape != mask.shape:
        raise ShapeError(f"noise {noise.shape} vs mask {mask.shape}")
    return SparseMutation(noise * mask, mask, seed)


def apply(theta: ParamVector, gamma: SparseMutation, sign: int) -> ParamVector:
    """Child genome theta + sign * gamma; frozen coordinates untouched."""
    if sign not in (1, -1):
        raise ConfigurationError(f"sign must be +1 or -1, got {sign}")
    if gamma.gamma.shape != theta.values.shape:
        raise ShapeError(f"gamma length {gamma.gamma.shape[0]} vs genome {theta.w}")
    return ParamVector(theta.values + sign * gamma.gamma)


def mirrored_quad(
    theta: ParamVector, noise: np.ndarray, mask: np.ndarray
) -> tuple[ParamVector, ParamVector, ParamVector, ParamVector]:
    """The four-child construction from one (noise, mask) draw.

    Children are (theta + N*M, theta + N*(1-M), theta - N*M, theta - N*(1-M)).
    Their mean recovers theta exactly for float32-valued inputs.
    """
    noise = np.asarray(noise, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.uint8)
    if noise.shape != theta.values.shape or mask.shape != theta.values.shape:
        raise ShapeError("noise/mask length must match the genome")
    g = noise * mask
    g_anti = noise * (1 - mask)
    t = theta.values
    return (
        ParamVector(t + g),
        ParamVector(t + g_anti),
        ParamVector(t - g),
        ParamVector(t - g_anti),
    )


@dataclass
class Child:
    """One spawned genome plus the randomness bookkeeping that produced it."""

    params: ParamVector
    seed: int  # noise seed of this child's group
    mask_seed: int
    group: int  # quad/pair index, or child index for independent children
    role: str  # "+M" | "+M'" | "-M" | "-M'" | "+" | "-" | "solo"


def spawn_mutations(
    theta: ParamVector,
    params: MutationParams,
    pop_size: int,
    master_seed: int,
) -> list[Child]:
    """Generate a population of mutated genomes.

    Static subspace mode reuses one mask (derived from master_seed alone)
    for every group with fresh noise per group; dynamic mode draws a fresh
    mask per group. All randomness derives from (master_seed, purpose,
    group), so the result is independent of evaluation order.
    """
    if pop_size < 1:
        raise ConfigurationError("pop_size must be positive")
    if params.mirrored and params.anti_random:
        if pop_size % 4 != 0:
            raise ConfigurationError(
                f"mirrored anti-random spawning needs pop_size divisible by 4, got {pop_size}"
            )
        group_size, roles = 4, ("+M", "+M'", "-M", "-M'")
    elif params.mirrored or params.anti_random:
        if pop_size % 2 != 0:
            raise ConfigurationError(
                f"paired spawning needs pop_size divisible by 2, got {pop_size}"
            )
        group_size = 2
        roles = ("+", "-") if params.mirrored else ("+M", "+M'")
    else:
        group_size, roles = 1, ("solo",)

    w = theta.w
    static_mask_seed = derive_seed(master_seed, _MASK_NS)
    children: list[Child] = []
    for group in range(pop_size // group_size):
        if params.subspace_mode == "static":
            mask_seed = static_mask_seed
        else:
            mask_seed = derive_seed(master_seed, _MASK_NS, group)
        noise_seed = derive_seed(master_seed, _NOISE_NS, group)
        mask = sample_mask(w, params.rho, mask_seed)
        noise = sample_noise(w, params.mu, params.sigma, noise_seed)

        if group_size == 4:
            genomes = mirrored_quad(theta, noise, mask)
        elif group_size == 2 and params.mirrored:
            g = compose(noise, mask, noise_seed)
            genomes = (apply(theta, g, +1), apply(theta, g, -1))
        elif group_size == 2:
            genomes = (
                apply(theta, compose(noise, mask, noise_seed), +1),
                apply(theta, compose(noise, complement(mask), noise_seed), +1),
            )
        else:
            genomes = (apply(theta, compose(noise, mask, noise_seed), +1),)

        for role, genome in zip(roles, genomes):
            children.append(Child(genome, noise_seed, mask_seed, group, role))
    return children


def mask_to_rle(mask: np.ndarray) -> str:
    """Run-length encoding "bitxcount ..." for debug dumps only."""
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.size == 0:
        return ""
    edges = np.flatnonzero(np.diff(mask)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [mask.size]])
    return " ".join(f"{int(mask[s])}x{e - s}" for s, e in zip(starts, ends))


def rle_to_mask(text: str) -> np.ndarray:
    parts = []
    for token in text.split():
        bit, count = token.split("x")
        parts.append(np.full(int(count), int(bit), dtype=np.uint8))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
