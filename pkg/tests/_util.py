"""Random-instance generators shared by the test modules."""

import numpy as np

from gaussalign import Gaussian


def random_pd(rng, d, ridge=0.1):
    a = rng.standard_normal((d, d))
    return a @ a.T + ridge * np.eye(d)


def random_gaussian(rng, d, centered=False, ridge=0.1):
    mean = np.zeros(d) if centered else rng.standard_normal(d)
    return Gaussian(mean, random_pd(rng, d, ridge))


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def rotate(g, r):
    return Gaussian(r @ g.mean, r @ g.cov @ r.T)


def make_cli_workspace(root):
    """Input files for exercising every CLI subcommand; returns a path dict."""
    from gaussalign.gaussian import save_gaussian, write_csv_matrix

    rng = np.random.default_rng(2024)
    paths = {}
    save_gaussian(Gaussian([0.0], [[1.0]]), root / "v1.json")
    save_gaussian(Gaussian([0.0], [[9.0]]), root / "v9.json")
    paths["v1"], paths["v9"] = root / "v1.json", root / "v9.json"
    for name in ("a", "b", "c"):
        save_gaussian(random_gaussian(rng, 3), root / f"{name}.json")
        paths[name] = root / f"{name}.json"
    ents = root / "entities"
    ents.mkdir()
    for i in range(6):
        lam = np.array([8.0, 4.0, 1.0]) if i % 2 else np.array([1.0, 0.6, 0.2])
        lam = lam * (1 + 0.05 * rng.standard_normal(3))
        q = random_orthogonal(rng, 3)
        save_gaussian(Gaussian.centered((q * lam) @ q.T), ents / f"e{i}.json")
    half = rng.standard_normal((20, 3)) * np.array([3.0, 2.0, 1.0])
    # symmetric cloud: fitted mean is zero up to round-off, so k-means accepts it
    write_csv_matrix(np.vstack([half, -half]), ents / "e6.csv")
    paths["entities"] = ents
    cents = root / "centered"
    cents.mkdir()
    for i in range(3):
        save_gaussian(random_gaussian(rng, 2 + i, centered=True), cents / f"c{i}.json")
    paths["centered"] = sorted(cents.iterdir())
    write_csv_matrix(rng.standard_normal((30, 2)), root / "cloud.csv")
    paths["cloud"] = root / "cloud.csv"
    x = rng.standard_normal((25, 4))
    write_csv_matrix(x, root / "x.csv")
    write_csv_matrix(x @ rng.standard_normal((4, 3)), root / "y.csv")
    paths["x"], paths["y"] = root / "x.csv", root / "y.csv"
    pts = rng.standard_normal((5, 2))
    dm = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    write_csv_matrix(dm, root / "dm.csv")
    paths["dm"] = root / "dm.csv"
    return paths


SUBCOMMANDS = (
    "fit", "w2", "igw", "igw-barycenter", "mmot", "mm-igw", "cluster", "mds", "cka", "bench-mmot",
)


def cli_commands(p):
    """One representative argv per subcommand."""
    s = str
    return {
        "fit": ["fit", "--input", s(p["cloud"])],
        "w2": ["w2", "--a", s(p["a"]), "--b", s(p["b"]), "--t", "0.3"],
        "igw": ["igw", "--a", s(p["a"]), "--b", s(p["b"]), "--method", "rgd", "--max-iters", "50",
                "--grad-tol", "1e-2", "--seed", "0"],
        "igw-barycenter": ["igw-barycenter", "--inputs", *map(s, p["centered"])],
        "mmot": ["mmot", "--inputs", s(p["v1"]), s(p["v9"]), "--weights", "0.5", "0.5"],
        "mm-igw": ["mm-igw", "--inputs", *map(s, p["centered"])],
        "cluster": ["cluster", "--dir", s(p["entities"]), "--k", "2", "--seed", "3"],
        "mds": ["mds", "--dir", s(p["entities"]), "--mode", "upper", "--threads", "3"],
        "cka": ["cka", "--x", s(p["x"]), "--y", s(p["y"])],
        "bench-mmot": ["bench-mmot", "--p", "3", "5", "10", "--seed", "1", "--threads", "2"],
    }
