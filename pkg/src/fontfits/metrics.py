"""The five evaluation measures: MAE, PSNR, SSIM, font-style MSE, and
stroke-color MSE, plus whole-corpus evaluation.

All pixel metrics run in the unit range [0, 1] after denormalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.ndimage import gaussian_filter

from .batching import from_chw, record_batch, to_chw
from .errors import EmptyMaskError, InvalidArgumentError, ShapeError
from .imtensor import ImageTensor, to_unit
from .thinning import mean_stroke_color, stroke_mask_from_title

PSNR_CAP_DB = 100.0

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # 11x11 window at sigma 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _unit_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    ua = to_unit(a) if isinstance(a, ImageTensor) else np.asarray(a, dtype=np.float64)
    ub = to_unit(b) if isinstance(b, ImageTensor) else np.asarray(b, dtype=np.float64)
    if ua.shape != ub.shape:
        raise ShapeError("metric inputs", ua.shape, ub.shape)
    return ua, ub


def mae(a, b) -> float:
    ua, ub = _unit_pair(a, b)
    return float(np.abs(ua - ub).mean())


def psnr(a, b) -> float:
    """10*log10(1/MSE) on unit range, capped so aggregates stay finite."""
    ua, ub = _unit_pair(a, b)
    mse = float(((ua - ub) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def _ssim_single(x: np.ndarray, y: np.ndarray) -> float:
    radius = int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5)
    filt = dict(sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE)
    ux = gaussian_filter(x, **filt)
    uy = gaussian_filter(y, **filt)
    uxx = gaussian_filter(x * x, **filt)
    uyy = gaussian_filter(y * y, **filt)
    uxy = gaussian_filter(x * y, **filt)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux ** 2 + uy ** 2 + c1) * (vx + vy + c2))
    core = s[radius:-radius, radius:-radius]
    if core.size == 0:
        raise InvalidArgumentError("image too small for the 11x11 SSIM window")
    return float(core.mean())


def ssim(a, b) -> float:
    """Gaussian-windowed SSIM (11x11, sigma 1.5), averaged over channels."""
    ua, ub = _unit_pair(a, b)
    if ua.ndim == 2:
        ua, ub = ua[:, :, None], ub[:, :, None]
    return float(np.mean([_ssim_single(ua[:, :, c], ub[:, :, c]) for c in range(ua.shape[2])]))


def check_style_vector(v: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (6,) or (v < -tol).any() or abs(v.sum() - 1.0) > tol:
        raise InvalidArgumentError(f"not a six-class style distribution: {v}")
    return v


def font_mse(img_a: ImageTensor, img_b: ImageTensor, classifier) -> float:
    """MSE between the six-dim font-style likelihood vectors of two titles."""
    va = check_style_vector(classifier.style_vector(img_a))
    vb = check_style_vector(classifier.style_vector(img_b))
    return float(((va - vb) ** 2).mean())


def color_mse(img_a: ImageTensor, img_b: ImageTensor, stroke_extractor=stroke_mask_from_title) -> float:
    """MSE between the mean stroke colors of two titles (unit range).

    Raises EmptyMaskError when either image has no detectable strokes.
    """
    ca = _stroke_color(img_a, stroke_extractor)
    cb = _stroke_color(img_b, stroke_extractor)
    return float(((ca - cb) ** 2).mean())


def _stroke_color(img: ImageTensor, stroke_extractor) -> np.ndarray:
    stroke = stroke_extractor(img)
    unit = ImageTensor(to_unit(img).astype(np.float32), "unit", img.color_tag)
    return mean_stroke_color(unit, stroke)


# --------------------------------------------------------------------------
# corpus-level evaluation


@dataclass
class EvalReport:
    variant: str
    count: int
    per_record: list = field(default_factory=list)
    means: dict = field(default_factory=dict)
    color_excluded: int = 0

    METRIC_ORDER = ("mae", "psnr", "ssim", "font_mse", "color_mse")

    def recompute_means(self):
        self.means = {}
        for key in self.METRIC_ORDER:
            vals = [r[key] for r in self.per_record if r.get(key) is not None]
            self.means[key] = float(np.mean(vals)) if vals else None

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "count": self.count,
            "color_excluded": self.color_excluded,
            "means": self.means,
            "per_record": self.per_record,
        }

    def table_row(self) -> str:
        cells = [f"{self.variant:<24s}"]
        for key in self.METRIC_ORDER:
            v = self.means.get(key)
            cells.append(f"{v:>9.3f}" if v is not None else f"{'-':>9s}")
        return " ".join(cells)

    @staticmethod
    def table_header() -> str:
        names = ("MAE", "PSNR", "SSIM", "Font MSE", "Color MSE")
        return " ".join([f"{'Method':<24s}"] + [f"{n:>9s}" for n in names])


def evaluate_corpus(bundle, records, classifier=None, substitute_text: str | None = None,
                    identity: bool = False, variant: str = "model") -> EvalReport:
    """Generate a title per record and score it against the ground truth.

    With ``substitute_text`` the model renders different text than the
    original, so only the style metrics (font/color MSE) apply and the
    full-reference metrics are reported absent. ``identity`` scores the
    ground truth against itself (pipeline sanity check).
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("cannot evaluate an empty corpus")
    report = EvalReport(variant=variant, count=len(records))
    full_reference = substitute_text is None

    for rec in records:
        gen_title = _generated_title(bundle, rec, substitute_text, identity)
        row: dict = {"record_id": rec.record_id}
        if full_reference:
            row["mae"] = mae(rec.true_title, gen_title)
            row["psnr"] = psnr(rec.true_title, gen_title)
            row["ssim"] = ssim(rec.true_title, gen_title)
        else:
            row["mae"] = row["psnr"] = row["ssim"] = None
        row["font_mse"] = (
            font_mse(rec.true_title, gen_title, classifier) if classifier is not None else None
        )
        try:
            row["color_mse"] = color_mse(rec.true_title, gen_title)
        except EmptyMaskError:
            row["color_mse"] = None
            row["color_excluded"] = True
            report.color_excluded += 1
        report.per_record.append(row)

    report.recompute_means()
    return report


def _generated_title(bundle, rec, substitute_text, identity) -> ImageTensor:
    if identity:
        return rec.true_title
    from .data import render_plain_text
    from .imtensor import normalize, quantize

    if substitute_text is not None:
        i_t = to_chw(quantize(normalize(render_plain_text(substitute_text))))
    else:
        i_t = to_chw(rec.input_text)
    bundle.eval()
    with torch.no_grad():
        o_t, _ = bundle.generate(
            i_t[None], to_chw(rec.cover)[None], to_chw(rec.location_mask)[None]
        )
    return from_chw(o_t[0], "unit_signed", "rgb")


def write_report(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
