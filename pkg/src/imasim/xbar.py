"""Bit-exact functional emulation of the PCM crossbar matrix-vector unit.

The crossbar stores 4-bit signed weights (one logical weight = two physical
devices in a differential pair; the pair only matters for device/area
accounting, the arithmetic uses a single signed integer). Inputs are 8-bit
unsigned pulse-duration codes driven on the wordlines; each bitline
integrates the products and its ADC applies per-column scaling, rounding
and clamping to produce an 8-bit signed output:

    y_i = clamp(round(s_i * sum_j A_ij * x_j), -128, 127)

Accumulation is exact (64-bit integer) when noise is disabled, so repeated
calls are deterministic and bit-identical to a direct integer reference.

Two optional Gaussian noise terms model device non-ideality:
- `program_sigma`: drawn once per cell at programming time (frozen write
  error),
- `noise_sigma`: drawn per mvm call (read noise).
Noise applies to programmed cells only; unprogrammed cells read as exact 0.
The RNG is owned by the array instance and is never shared implicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_MIN = -8
WEIGHT_MAX = 7
INPUT_MAX = 255
OUT_MIN = -128
OUT_MAX = 127
DEVICES_PER_WEIGHT = 2


class WeightOutOfRange(ValueError):
    """A weight falls outside the 4-bit signed range [-8, 7]."""


class RegionOverflow(ValueError):
    """A programming region does not fit within the array bounds."""


class RegionOverlap(ValueError):
    """A programming region overlaps previously programmed cells."""


class OutOfBounds(IndexError):
    """Cell coordinates outside the array."""


class DimensionMismatch(ValueError):
    """Input vector length does not match the array row count."""


@dataclass(frozen=True, slots=True)
class CrossbarConfig:
    rows: int
    cols: int
    weight_bits: int = 4
    input_bits: int = 8
    output_bits: int = 8
    devices_per_weight: int = DEVICES_PER_WEIGHT

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array dimensions must be >= 1")


@dataclass(frozen=True, slots=True)
class Region:
    row_off: int
    col_off: int
    rows: int
    cols: int


@dataclass(frozen=True, slots=True)
class AdcConfig:
    """Per-column ADC transfer: affine scale, round half away from zero,
    clamp to the signed 8-bit output range.

    `scale` is either a single positive factor shared by all columns or a
    sequence with one factor per column. The same policy object is used by
    the golden-model reference so that equivalence checks exercise the
    mapping/streaming path, not the requantization choice.
    """

    scale: float | tuple[float, ...] = 1.0
    lo: int = OUT_MIN
    hi: int = OUT_MAX

    def __post_init__(self):
        scales = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        if np.any(scales <= 0):
            raise ValueError("ADC scales must be positive")

    def scales(self, cols: int) -> np.ndarray:
        s = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        if s.size == 1:
            return np.full(cols, s[0])
        if s.size != cols:
            raise DimensionMismatch(f"{s.size} ADC scales for {cols} columns")
        return s

    def slice(self, start: int, stop: int) -> "AdcConfig":
        """Column sub-range of a per-column configuration (padded with 1.0)."""
        s = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        if s.size == 1:
            return self
        padded = np.ones(stop, dtype=np.float64)
        avail = min(stop, s.size)
        padded[:avail] = s[:avail]
        return AdcConfig(tuple(padded[start:stop]), self.lo, self.hi)

    def requantize(self, acc: np.ndarray) -> np.ndarray:
        """Scale, round half away from zero, clamp. Returns int8."""
        scaled = acc.astype(np.float64) * self.scales(acc.shape[-1])
        rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
        return np.clip(rounded, self.lo, self.hi).astype(np.int8)


class ProgrammedArray:
    """Integer-weight crossbar state with device accounting and optional noise.

    Weights are stored at (row j, col i): column i accumulates
    sum_j W[j, i] * x[j]. Programming a region marks its cells in the
    programmed mask; structural zeros inside a region count as programmed
    devices (they are real, zero-conductance-pair devices).
    """

    def __init__(self, rows: int, cols: int, noise_sigma: float = 0.0,
                 program_sigma: float = 0.0, seed: int = 0):
        if rows < 1 or cols < 1:
            raise ValueError("array dimensions must be >= 1")
        self.rows = rows
        self.cols = cols
        self.noise_sigma = float(noise_sigma)
        self.program_sigma = float(program_sigma)
        self.weights = np.zeros((rows, cols), dtype=np.int16)
        self.mask = np.zeros((rows, cols), dtype=bool)
        self._program_noise = None  # lazily allocated float64 grid
        self._rng = np.random.default_rng(seed)

    @classmethod
    def from_config(cls, config: CrossbarConfig, noise_sigma: float = 0.0,
                    program_sigma: float = 0.0, seed: int = 0) -> "ProgrammedArray":
        return cls(config.rows, config.cols, noise_sigma=noise_sigma,
                   program_sigma=program_sigma, seed=seed)

    @property
    def devices_used(self) -> int:
        return DEVICES_PER_WEIGHT * int(self.mask.sum())

    def program(self, region: Region, weights) -> "ProgrammedArray":
        """Write an integer weight block into `region`.

        Rejects weights outside [-8, 7], regions that overflow the array,
        and regions overlapping previously programmed cells.
        """
        w = np.asarray(weights, dtype=np.int64)
        if w.shape != (region.rows, region.cols):
            raise DimensionMismatch(
                f"weight block {w.shape} does not match region "
                f"{(region.rows, region.cols)}")
        if region.row_off < 0 or region.col_off < 0 \
                or region.row_off + region.rows > self.rows \
                or region.col_off + region.cols > self.cols:
            raise RegionOverflow(f"{region} exceeds {self.rows}x{self.cols} array")
        if np.any(w < WEIGHT_MIN) or np.any(w > WEIGHT_MAX):
            bad = w[(w < WEIGHT_MIN) | (w > WEIGHT_MAX)][0]
            raise WeightOutOfRange(f"weight {bad} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]")
        rs = slice(region.row_off, region.row_off + region.rows)
        cs = slice(region.col_off, region.col_off + region.cols)
        if self.mask[rs, cs].any():
            raise RegionOverlap(f"{region} overlaps programmed cells")
        self.weights[rs, cs] = w
        self.mask[rs, cs] = True
        if self.program_sigma > 0:
            if self._program_noise is None:
                self._program_noise = np.zeros((self.rows, self.cols))
            self._program_noise[rs, cs] = self._rng.normal(
                0.0, self.program_sigma, size=(region.rows, region.cols))
        return self

    def read_conductance(self, row: int, col: int) -> int:
        """Programmed integer weight at (row, col); 0 when unprogrammed."""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise OutOfBounds(f"({row}, {col}) outside {self.rows}x{self.cols} array")
        return int(self.weights[row, col])

    def mvm(self, x, adc: AdcConfig) -> np.ndarray:
        """One crossbar operation: y = requantize(W^T x). Returns int8[cols].

        Noise-free arrays accumulate in exact 64-bit integers; with noise
        enabled the effective weight of each programmed cell is perturbed
        and accumulation is done in float64.
        """
        xv = np.asarray(x)
        if xv.shape != (self.rows,):
            raise DimensionMismatch(f"input length {xv.shape} != rows {self.rows}")
        if np.any(xv < 0) or np.any(xv > INPUT_MAX):
            raise ValueError("inputs must be unsigned 8-bit values")
        noisy = self.noise_sigma > 0 or self._program_noise is not None
        if not noisy:
            acc = self.weights.T.astype(np.int64) @ xv.astype(np.int64)
        else:
            w = self.weights.astype(np.float64)
            if self._program_noise is not None:
                w = w + self._program_noise
            if self.noise_sigma > 0:
                read_noise = self._rng.normal(0.0, self.noise_sigma,
                                              size=w.shape) * self.mask
                w = w + read_noise
            acc = w.T @ xv.astype(np.float64)
        return adc.requantize(acc)

    # --- textual snapshot format (test fixtures) -------------------------
    #
    #   rows <R> cols <C>
    #   <R lines of C integers>      programmed weights
    #   <R lines of C 0/1 flags>     programmed mask

    def dump(self, fp) -> None:
        fp.write(f"rows {self.rows} cols {self.cols}\n")
        for r in range(self.rows):
            fp.write(" ".join(str(int(v)) for v in self.weights[r]) + "\n")
        for r in range(self.rows):
            fp.write(" ".join("1" if v else "0" for v in self.mask[r]) + "\n")

    @classmethod
    def load(cls, fp) -> "ProgrammedArray":
        header = fp.readline().split()
        if len(header) != 4 or header[0] != "rows" or header[2] != "cols":
            raise ValueError("malformed array snapshot header")
        rows, cols = int(header[1]), int(header[3])
        arr = cls(rows, cols)
        for r in range(rows):
            arr.weights[r] = [int(v) for v in fp.readline().split()]
        for r in range(rows):
            arr.mask[r] = [v == "1" for v in fp.readline().split()]
        if np.any(arr.weights[~arr.mask] != 0):
            raise ValueError("snapshot has nonzero weights outside the mask")
        if np.any(arr.weights < WEIGHT_MIN) or np.any(arr.weights > WEIGHT_MAX):
            raise WeightOutOfRange("snapshot weight outside 4-bit signed range")
        return arr
