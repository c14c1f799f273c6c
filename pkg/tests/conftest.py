"""Session-scoped fixtures: the default scene, the trajectory corpus, and the
expensive CLI artifacts (two `gen` runs and two full `compare` runs) shared by
the acceptance gate and the per-module suites."""

import time

import pytest

from gpintent import default_scene, gen_corpus
from gpintent.cli import main as cli_main


@pytest.fixture(scope="session")
def scene():
    return default_scene()


@pytest.fixture(scope="session")
def corpus(scene):
    return gen_corpus(scene)


@pytest.fixture(scope="session")
def corpus_by_pair(corpus):
    return {(r.start_id, r.end_id): r for r in corpus}


@pytest.fixture(scope="session")
def cli_gen_dirs(tmp_path_factory):
    """Two independent `gen` invocations with identical arguments."""
    dirs = []
    for name in ("gen_a", "gen_b"):
        d = tmp_path_factory.mktemp(name)
        assert cli_main(["gen", "--out-dir", str(d)]) == 0
        dirs.append(d)
    return tuple(dirs)


@pytest.fixture(scope="session")
def cli_corpus_dir(cli_gen_dirs):
    return cli_gen_dirs[0]


@pytest.fixture(scope="session")
def compare_runs(tmp_path_factory, cli_corpus_dir):
    """Two identical full strategy comparisons over the generated corpus.

    Returns (first_dir, second_dir, first_run_elapsed_seconds).  The first
    run's wall time feeds the acceptance runtime bound; the pair of output
    directories feeds the byte-for-byte reproducibility check.
    """
    d1 = tmp_path_factory.mktemp("cmp_a")
    d2 = tmp_path_factory.mktemp("cmp_b")
    t0 = time.perf_counter()
    assert cli_main(["compare", "--corpus", str(cli_corpus_dir),
                     "--out-dir", str(d1)]) == 0
    elapsed = time.perf_counter() - t0
    assert cli_main(["compare", "--corpus", str(cli_corpus_dir),
                     "--out-dir", str(d2)]) == 0
    return d1, d2, elapsed
