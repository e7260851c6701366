import io

import numpy as np
import pytest

from tvnet.data import (EmpiricalCovSequence, InputError, ObservationSet, ParseError,
                        Penalty, PenaltySpec, SolverConfig, ThetaSequence,
                        bucket_times, center_columns, empirical_covariances,
                        load_timeseries, parse_rows)


def _rows(text):
    return io.StringIO(text)


def test_grouping_by_time():
    text = "1,1,2,3,4\n1,0,0,0,1\n1,2,2,2,2\n2,1,1,1,1\n2,0,1,0,1\n"
    obs = ObservationSet.from_rows(*parse_rows(_rows(text)))
    assert obs.T == 2 and obs.p == 4
    assert list(obs.counts) == [3, 2]


def test_unsorted_times_are_sorted_into_buckets():
    obs = ObservationSet.from_rows(*parse_rows(_rows("5,1\n3,2\n3,4\n")))
    assert list(obs.timestamps) == [3.0, 5.0]
    assert list(obs.counts) == [2, 1]


def test_ragged_row_names_the_row():
    lines = "\n".join(["0,1,2,3,4"] * 6 + ["1,1,2,3"]) + "\n"
    with pytest.raises(ParseError, match="ragged row 7") as exc:
        parse_rows(_rows(lines))
    assert exc.value.row == 7


def test_non_numeric_and_empty_inputs():
    with pytest.raises(ParseError, match="row 2"):
        parse_rows(_rows("0,1\n0,abc\n"))
    with pytest.raises(ParseError, match="empty"):
        parse_rows(_rows(""))


def test_header_and_tsv(tmp_path):
    path = tmp_path / "x.tsv"
    path.write_text("t\ta\tb\n0\t1\t2\n0\t3\t4\n1\t5\t6\n")
    obs = load_timeseries(path, has_header=True)
    assert obs.T == 2 and obs.p == 2
    np.testing.assert_array_equal(obs.samples[0], [[1, 2], [3, 4]])


def test_bucketing(tmp_path):
    assert list(bucket_times([0.2, 0.9, 1.1, 2.5], 1.0)) == [0, 0, 1, 2]
    path = tmp_path / "x.csv"
    path.write_text("0.2,1\n0.9,2\n1.1,3\n")
    assert list(load_timeseries(path, bucket=1.0).counts) == [2, 1]
    with pytest.raises(InputError):
        bucket_times([1.0], 0.0)


def test_center_columns():
    zero = ObservationSet(np.array([0.0]), (np.zeros((3, 2)),))
    np.testing.assert_array_equal(center_columns(zero).samples[0], 0.0)
    one = ObservationSet(np.array([0.0]), (np.array([[3.0, -1.0]]),))
    np.testing.assert_array_equal(center_columns(one).samples[0], [[0.0, 0.0]])
    two = ObservationSet(np.array([0.0, 1.0]), (np.array([[1.0, 3.0]]), np.array([[3.0, 5.0]])))
    out = center_columns(two)
    np.testing.assert_allclose(np.concatenate(out.samples), [[-1, -1], [1, 1]])


def test_empirical_covariances_examples():
    obs = ObservationSet(np.array([0.0, 1.0]),
                         (np.array([[1.0, 2.0]]), np.array([[1.0, 0.0], [-1.0, 0.0]])))
    covs = empirical_covariances(obs)
    np.testing.assert_allclose(covs.covs[0], [[1, 2], [2, 4]])
    assert np.linalg.matrix_rank(covs.covs[0]) == 1
    np.testing.assert_allclose(covs.covs[1], [[1, 0], [0, 0]])
    np.testing.assert_array_equal(covs.counts, [1, 2])


def test_empirical_covariances_symmetric_psd():
    rng = np.random.default_rng(0)
    samples = tuple(rng.normal(size=(int(n), 5)) for n in rng.integers(1, 8, size=6))
    covs = empirical_covariances(ObservationSet(np.arange(6.0), samples))
    np.testing.assert_array_equal(covs.covs, np.swapaxes(covs.covs, 1, 2))
    assert np.all(np.linalg.eigvalsh(covs.covs)[:, 0] > -1e-12)


def test_observation_set_validation():
    with pytest.raises(InputError):
        ObservationSet(np.array([1.0, 0.0]), (np.ones((1, 2)), np.ones((1, 2))))
    with pytest.raises(InputError):
        ObservationSet(np.array([0.0, 1.0]), (np.ones((1, 2)), np.ones((1, 3))))


def test_cov_sequence_gaps_and_pooled():
    covs = EmpiricalCovSequence(np.stack([np.eye(2), 3 * np.eye(2)]), [1, 3], [0.0, 2.0])
    np.testing.assert_array_equal(covs.gaps, [2.0])
    pooled = covs.pooled()
    assert pooled.T == 1 and pooled.counts[0] == 4
    np.testing.assert_allclose(pooled.covs[0], 2.5 * np.eye(2))


def test_penalty_and_config_validation(monkeypatch):
    assert PenaltySpec("perturbed-node", 1, 2).kind is Penalty.PERTURBED_NODE
    with pytest.raises(ValueError):
        PenaltySpec("l3", 1, 1)
    with pytest.raises(InputError):
        PenaltySpec("l1", -1, 1)
    with pytest.raises(InputError):
        SolverConfig(rho=0)
    with pytest.raises(InputError):
        SolverConfig(max_iter=0)
    monkeypatch.setenv("TVNET_THREADS", "3")
    assert SolverConfig.from_env().threads == 3
    assert SolverConfig.from_env(threads=2).threads == 2


def test_theta_sequence_support_and_edges():
    M = np.array([[2.0, 0.5, 0.0], [0.5, 2.0, 1e-6], [0.0, 1e-6, 2.0]])
    seq = ThetaSequence(M)
    assert len(seq) == 1 and seq.p == 3
    assert seq.edges(0) == [(0, 1, 0.5)]
    assert not seq.support()[0].diagonal().any()
    assert seq.is_positive_definite()
    assert not ThetaSequence(-M).is_positive_definite()
