"""Independent reference implementations used only to check the package:
slow, loop-based, and deliberately written against the published formulas
rather than the production code paths.
"""

import math

import numpy as np
from scipy import ndimage


def mmd_brute_force(codes: np.ndarray, prior: np.ndarray, kernel_fn) -> float:
    """Double-loop unbiased two-sample estimate."""
    n = codes.shape[0]
    s_mm = 0.0
    s_zz = 0.0
    for l in range(n):
        for j in range(n):
            if l != j:
                s_mm += kernel_fn(codes[l], codes[j])
                s_zz += kernel_fn(prior[l], prior[j])
    s_mz = 0.0
    for l in range(n):
        for j in range(n):
            s_mz += kernel_fn(codes[l], prior[j])
    return (s_mm + s_zz) / (n * n - n) - 2.0 * s_mz / (n * n)


def kernel_fn_named(name: str, dim: int, prior_std: float = 1.0):
    c = 2.0 * dim * prior_std ** 2
    scales = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
    if name == "imq":
        return lambda a, b: c / (c + float(np.sum((a - b) ** 2)))
    if name == "rbf-mixture":
        return lambda a, b: float(np.mean(
            [math.exp(-float(np.sum((a - b) ** 2)) / (s * c)) for s in scales]))
    if name == "gaussian-unit":
        return lambda a, b: math.exp(-float(np.sum((a - b) ** 2)))
    raise ValueError(name)


def central_difference_grad(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Finite-difference gradient of a scalar function of one array."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = fn(x)
        flat[i] = orig - h
        f_minus = fn(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2 * h)
    return grad


# --- loop-based underwater quality oracle ---


def _trimmed(values, alpha=0.1):
    flat = np.sort(np.asarray(values, dtype=np.float64), axis=None)
    t = int(alpha * flat.size)
    trimmed = flat[t:flat.size - t]
    mu = trimmed.mean()
    var = np.mean((trimmed - mu) ** 2)
    return mu, var


def oracle_uicm(img):
    img = img.astype(np.float64)
    rg = img[..., 0] - img[..., 1]
    yb = (img[..., 0] + img[..., 1]) / 2.0 - img[..., 2]
    mu_rg, v_rg = _trimmed(rg)
    mu_yb, v_yb = _trimmed(yb)
    return -0.0268 * math.sqrt(mu_rg ** 2 + mu_yb ** 2) + 0.1586 * math.sqrt(v_rg + v_yb)


def _oracle_sobel(ch):
    gx = ndimage.sobel(ch, axis=1, mode="reflect")
    gy = ndimage.sobel(ch, axis=0, mode="reflect")
    return np.hypot(gx, gy)


def _oracle_eme(ch, size=8):
    h, w = ch.shape
    nx, ny = math.ceil(h / size), math.ceil(w / size)
    total = 0.0
    for i in range(nx):
        for j in range(ny):
            block = ch[i * size:(i + 1) * size, j * size:(j + 1) * size]
            mn, mx = float(block.min()), float(block.max())
            if mn == 0.0:
                mn = 1.0
            if mx == 0.0:
                mx = 1.0
            total += math.log(mx / mn)
    return 2.0 / (nx * ny) * total


def oracle_uism(img):
    img = img.astype(np.float64)
    weights = (0.299, 0.587, 0.114)
    total = 0.0
    for c, w in enumerate(weights):
        ch = img[..., c]
        total += w * _oracle_eme(ch * _oracle_sobel(ch))
    return total


def _plipsum(a, b, g=1026.0):
    return a + b - a * b / g


def _plipsub(a, b, g=1026.0):
    return g * (a - b) / (g - b)


def oracle_logamee(ch, size=16, g=1026.0):
    h, w = ch.shape
    nx, ny = math.ceil(h / size), math.ceil(w / size)
    s = 0.0
    for i in range(nx):
        for j in range(ny):
            block = ch[i * size:(i + 1) * size, j * size:(j + 1) * size]
            mn, mx = float(block.min()), float(block.max())
            top = _plipsub(mx, mn)
            bottom = _plipsum(mx, mn)
            m = 0.0 if bottom == 0.0 else top / bottom
            if m != 0.0:
                s += m * math.log(m)
    w_total = 1.0 / (nx * ny)
    return g - g * (1.0 - s / g) ** w_total


def oracle_uiqm(img):
    img = np.asarray(img, dtype=np.float64)
    gray = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    return (0.0282 * oracle_uicm(img)
            + 0.2953 * oracle_uism(img)
            + 3.5753 * oracle_logamee(gray))
