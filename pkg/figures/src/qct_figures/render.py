"""Raster rendering.

The phase-space style maps luminosity linearly to |Re W| (black = 0) with
nearest-cell pixels (integer upscaling, no interpolation), so structure at
the smearing scale stays inspectable; a companion panel shows the
position marginal. The trajectory style is a plain line plot of the mean
position. All drawing uses Pillow's default bitmap font and fixed
palettes, which makes output files byte-deterministic.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .qctw import FormatError, GridDump, read_qctw

MARGIN_LEFT = 48
MARGIN_BOTTOM = 36
MARGIN_TOP = 12
MARGIN_RIGHT = 16
PANEL_HEIGHT = 90
PANEL_GAP = 20


@dataclass
class RenderLayout:
    """Pixel geometry of a rendered phase-space figure (for tests and
    tooling)."""

    heatmap_box: tuple    # (left, top, right, bottom), right/bottom exclusive
    panel_box: tuple
    scale: int
    image_size: tuple


def _atomic_save(image: Image.Image, path: str) -> None:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _font():
    return ImageFont.load_default()


def render_wigner(dump_path: str, out_path: str,
                  max_pixels: int = 768) -> RenderLayout:
    """Render a QCTW dump: |Re W| heatmap (black = 0) over axes x, p plus
    the position-marginal panel underneath. Returns the pixel layout."""
    grid = read_qctw(dump_path)
    mag = np.abs(np.real(grid.values))
    peak = mag.max()
    lum = (mag / peak * 255.0).astype(np.uint8) if peak > 0 else \
        np.zeros_like(mag, dtype=np.uint8)

    scale = max(1, max_pixels // max(grid.n_x, grid.n_p))
    # columns = x (left to right), rows = p (top row = largest p)
    cells = lum.T[::-1, :]
    heat = Image.fromarray(cells, mode="L").resize(
        (grid.n_x * scale, grid.n_p * scale), resample=Image.NEAREST)

    hm_w, hm_h = heat.size
    panel_top = MARGIN_TOP + hm_h + PANEL_GAP
    width = MARGIN_LEFT + hm_w + MARGIN_RIGHT
    height = panel_top + PANEL_HEIGHT + MARGIN_BOTTOM
    img = Image.new("L", (width, height), color=230)
    img.paste(heat, (MARGIN_LEFT, MARGIN_TOP))

    draw = ImageDraw.Draw(img)
    font = _font()
    x_lo = grid.x0
    x_hi = grid.x0 + grid.dx * (grid.n_x - 1)
    p_lo = grid.p0
    p_hi = grid.p0 + grid.dp * (grid.n_p - 1)
    draw.text((MARGIN_LEFT + hm_w // 2, MARGIN_TOP + hm_h + 3), "x",
              fill=0, font=font, anchor="ma")
    draw.text((MARGIN_LEFT - 10, MARGIN_TOP + hm_h // 2), "p",
              fill=0, font=font, anchor="rm")
    draw.text((MARGIN_LEFT, MARGIN_TOP + hm_h + 3), f"{x_lo:g}",
              fill=0, font=font, anchor="la")
    draw.text((MARGIN_LEFT + hm_w, MARGIN_TOP + hm_h + 3), f"{x_hi:g}",
              fill=0, font=font, anchor="ra")
    draw.text((MARGIN_LEFT - 4, MARGIN_TOP), f"{p_hi:g}",
              fill=0, font=font, anchor="rt")
    draw.text((MARGIN_LEFT - 4, MARGIN_TOP + hm_h), f"{p_lo:g}",
              fill=0, font=font, anchor="rs")

    # position marginal: Int W dp, drawn as a filled profile
    marginal = grid.values.sum(axis=1) * grid.dp
    top = marginal.max()
    panel = Image.new("L", (hm_w, PANEL_HEIGHT), color=255)
    pd = ImageDraw.Draw(panel)
    if top > 0:
        ys = PANEL_HEIGHT - 1 - np.round(
            np.clip(marginal, 0.0, None) / top * (PANEL_HEIGHT - 6)
        ).astype(int)
        for i in range(grid.n_x):
            for px in range(i * scale, (i + 1) * scale):
                pd.line([(px, PANEL_HEIGHT - 1), (px, ys[i])], fill=120)
        pts = []
        for i in range(grid.n_x):
            for px in range(i * scale, (i + 1) * scale):
                pts.append((px, ys[i]))
        pd.line(pts, fill=0)
    img.paste(panel, (MARGIN_LEFT, panel_top))
    draw.rectangle([MARGIN_LEFT, panel_top, MARGIN_LEFT + hm_w - 1,
                    panel_top + PANEL_HEIGHT - 1], outline=0)
    draw.text((MARGIN_LEFT - 10, panel_top + PANEL_HEIGHT // 2), "|psi|^2",
              fill=0, font=font, anchor="rm")

    _atomic_save(img, out_path)
    return RenderLayout(
        heatmap_box=(MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT + hm_w,
                     MARGIN_TOP + hm_h),
        panel_box=(MARGIN_LEFT, panel_top, MARGIN_LEFT + hm_w,
                   panel_top + PANEL_HEIGHT),
        scale=scale,
        image_size=(width, height),
    )


def _read_trajectory_csv(path: str):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if "t" not in header or "mean_x" not in header:
            raise FormatError(f"{path}: need columns t and mean_x, got {header}")
        it = header.index("t")
        ix = header.index("mean_x")
        ts, xs = [], []
        for row in reader:
            if not row:
                continue
            ts.append(float(row[it]))
            xs.append(float(row[ix]))
    if not ts:
        raise FormatError(f"{path}: no data rows")
    return np.asarray(ts), np.asarray(xs)


def render_trajectory(csv_path: str, out_path: str, width: int = 820,
                      height: int = 360) -> None:
    """Line plot of the observed mean position against time."""
    ts, xs = _read_trajectory_csv(csv_path)
    img = Image.new("L", (width, height), color=255)
    draw = ImageDraw.Draw(img)
    font = _font()
    left, right = 52, width - 14
    top, bottom = 14, height - 34

    t_lo, t_hi = float(ts.min()), float(ts.max())
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if t_hi == t_lo:
        t_hi = t_lo + 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (x_hi - x_lo)
    x_lo -= pad
    x_hi += pad

    def to_px(t, x):
        u = left + (t - t_lo) / (t_hi - t_lo) * (right - left)
        v = bottom - (x - x_lo) / (x_hi - x_lo) * (bottom - top)
        return (round(u), round(v))

    draw.rectangle([left, top, right, bottom], outline=0)
    if x_lo < 0 < x_hi:
        z = to_px(t_lo, 0.0)[1]
        draw.line([(left, z), (right, z)], fill=200)
    draw.line([to_px(t, x) for t, x in zip(ts, xs)], fill=0)

    draw.text(((left + right) // 2, bottom + 4), "t", fill=0, font=font,
              anchor="ma")
    draw.text((left - 8, (top + bottom) // 2), "<x>", fill=0, font=font,
              anchor="rm")
    draw.text((left, bottom + 4), f"{t_lo:g}", fill=0, font=font, anchor="la")
    draw.text((right, bottom + 4), f"{t_hi:g}", fill=0, font=font, anchor="ra")
    draw.text((left - 4, top), f"{x_hi:.3g}", fill=0, font=font, anchor="rt")
    draw.text((left - 4, bottom), f"{x_lo:.3g}", fill=0, font=font, anchor="rs")

    _atomic_save(img, out_path)
