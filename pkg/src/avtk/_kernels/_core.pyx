# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-pixel and per-sample inner loops.

Bit-compatibility contract: results must match _kernels.fallback
exactly. Float work is float64 in the same operand order; the build
disables FP contraction so no FMA fusing can change a rounding.
"""

from libc.math cimport floor

import numpy as np

BACKEND_NAME = "c"


def mean_pixel(const unsigned char[::1] pixels not None):
    cdef Py_ssize_t n = pixels.shape[0]
    if n == 0:
        raise ValueError("empty pixel buffer")
    cdef unsigned long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += pixels[i]
    return total / <double>n


def frame_msd(const unsigned char[::1] a not None,
              const unsigned char[::1] b not None):
    cdef Py_ssize_t n = a.shape[0]
    if n != b.shape[0]:
        raise ValueError(f"buffer sizes differ: {n} vs {b.shape[0]}")
    if n == 0:
        raise ValueError("empty pixel buffer")
    cdef unsigned long long total = 0
    cdef long d
    cdef Py_ssize_t i
    for i in range(n):
        d = <long>a[i] - <long>b[i]
        total += <unsigned long long>(d * d)
    return total / <double>n


def bright_bounds(const unsigned char[::1] pixels not None,
                  Py_ssize_t width, Py_ssize_t height, int threshold):
    """Inclusive bounding box of pixels with any channel > threshold."""
    if width * height * 3 != pixels.shape[0]:
        raise ValueError("buffer does not match dimensions")
    cdef Py_ssize_t x0 = width, y0 = height, x1 = -1, y1 = -1
    cdef Py_ssize_t x, y, base
    cdef int bright
    for y in range(height):
        base = y * width * 3
        for x in range(width):
            bright = (pixels[base + 3 * x] > threshold
                      or pixels[base + 3 * x + 1] > threshold
                      or pixels[base + 3 * x + 2] > threshold)
            if bright:
                if x < x0:
                    x0 = x
                if x > x1:
                    x1 = x
                if y < y0:
                    y0 = y
                if y > y1:
                    y1 = y
    if x1 < 0:
        return None
    return (x0, y0, x1, y1)


def longest_quiet_run(const short[::1] samples not None, int amp):
    cdef Py_ssize_t n = samples.shape[0]
    cdef Py_ssize_t best = 0, run = 0
    cdef Py_ssize_t i
    cdef int v
    for i in range(n):
        v = samples[i]
        if v < 0:
            v = -v
        if v <= amp:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    return best


def resize_bilinear(const unsigned char[::1] pixels not None,
                    Py_ssize_t src_w, Py_ssize_t src_h,
                    Py_ssize_t dst_w, Py_ssize_t dst_h):
    """Bilinear RGB24 resize, half-pixel centers, floor(v+0.5) rounding."""
    if src_w <= 0 or src_h <= 0 or dst_w <= 0 or dst_h <= 0:
        raise ValueError("dimensions must be positive")
    if src_w * src_h * 3 != pixels.shape[0]:
        raise ValueError("buffer does not match dimensions")

    out = bytearray(dst_w * dst_h * 3)
    cdef unsigned char[::1] dst = out

    x0a = np.empty(dst_w, dtype=np.intc)
    x1a = np.empty(dst_w, dtype=np.intc)
    fxa = np.empty(dst_w, dtype=np.float64)
    cdef int[::1] x0v = x0a
    cdef int[::1] x1v = x1a
    cdef double[::1] fxv = fxa

    cdef double scale_x = src_w / <double>dst_w
    cdef double scale_y = src_h / <double>dst_h
    cdef double s, fy
    cdef Py_ssize_t dx, dy, y0, y1, c, row0, row1, o
    cdef double p00, p01, p10, p11, top, bot, val, fx1
    cdef int xi0, xi1

    for dx in range(dst_w):
        s = (dx + 0.5) * scale_x - 0.5
        if s < 0.0:
            s = 0.0
        if s > src_w - 1.0:
            s = src_w - 1.0
        x0v[dx] = <int>floor(s)
        fxv[dx] = s - floor(s)
        x1v[dx] = x0v[dx] + 1 if x0v[dx] + 1 < src_w else <int>(src_w - 1)

    for dy in range(dst_h):
        s = (dy + 0.5) * scale_y - 0.5
        if s < 0.0:
            s = 0.0
        if s > src_h - 1.0:
            s = src_h - 1.0
        y0 = <Py_ssize_t>floor(s)
        fy = s - floor(s)
        y1 = y0 + 1 if y0 + 1 < src_h else src_h - 1
        row0 = y0 * src_w * 3
        row1 = y1 * src_w * 3
        o = dy * dst_w * 3
        for dx in range(dst_w):
            xi0 = x0v[dx]
            xi1 = x1v[dx]
            fx1 = fxv[dx]
            for c in range(3):
                p00 = pixels[row0 + 3 * xi0 + c]
                p01 = pixels[row0 + 3 * xi1 + c]
                p10 = pixels[row1 + 3 * xi0 + c]
                p11 = pixels[row1 + 3 * xi1 + c]
                top = (1.0 - fx1) * p00 + fx1 * p01
                bot = (1.0 - fx1) * p10 + fx1 * p11
                val = (1.0 - fy) * top + fy * bot
                val = floor(val + 0.5)
                if val < 0.0:
                    val = 0.0
                if val > 255.0:
                    val = 255.0
                dst[o + 3 * dx + c] = <unsigned char>val
    return bytes(out)


def amp_hist_update(long long[:, ::1] counts not None,
                    const short[::1] samples not None, int shift):
    """Add one clip to an (amp_bins, clip_len) count matrix in place."""
    cdef Py_ssize_t n = samples.shape[0]
    if counts.shape[1] != n:
        raise ValueError("clip length does not match matrix width")
    cdef Py_ssize_t t
    cdef int row
    for t in range(n):
        row = (<int>samples[t] + 32768) >> shift
        counts[row, t] += 1
