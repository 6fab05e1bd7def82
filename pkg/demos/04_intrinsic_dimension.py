"""Two-NN intrinsic dimensionality on known manifolds and embedding clouds.

The estimator sees only neighbor-distance ratios, so it recovers the manifold
dimension regardless of the ambient space; L2 normalization reproduces the
cosine-distance geometry used for embedding analyses.
"""

import numpy as np

from brainenc.geometry import l2_normalize_rows, two_nn_id


def main():
    rng = np.random.default_rng(0)

    square = rng.uniform(size=(8000, 2))
    est = two_nn_id(square, seed=0)
    print(f"uniform square (d=2):        {est.id:.3f}  (n={est.n_used})")

    segment = rng.uniform(size=(8000, 1)) * rng.standard_normal(16)
    est = two_nn_id(segment, seed=0)
    print(f"segment in 16-D (d=1):       {est.id:.3f}")

    gauss = rng.standard_normal((8000, 8))
    est = two_nn_id(gauss, seed=0)
    print(f"8-D gaussian (d=8):          {est.id:.3f}")

    # embedding-like cloud: 6-D latent structure in 256 ambient dims,
    # normalized to the sphere as the pipeline does
    latent = rng.standard_normal((8000, 6))
    mix = rng.standard_normal((6, 256))
    cloud, dropped = l2_normalize_rows(latent @ mix)
    est = two_nn_id(cloud, seed=0)
    print(f"6-D latent cloud in 256-D:   {est.id:.3f}  (dropped {dropped} zero rows)")

    # duplicates are removed, not jittered
    with_dupes = np.vstack([square[:4000], square[:50], square[4000:]])
    est = two_nn_id(with_dupes, max_n=10_000, seed=0)
    print(f"with 50 duplicated points:   {est.id:.3f}  "
          f"(removed {est.duplicates_removed})")


if __name__ == "__main__":
    main()
