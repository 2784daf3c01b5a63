"""
Test type: Unit + integration test
Validation: MAML adaptation, second- and first-order outer gradients, training loop and evaluation
Command: pytest test/test_maml.py -v          (add -m slow for desk-scale runs)
"""

import csv
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np
import pytest
from pydantic import ValidationError

from metakit.autodiff import Graph, Tensor, gradients
from metakit.core.errors import ConfigurationError, ContractError
from metakit.data import (
    ClassSplitter,
    MetaDataset,
    MetaSplit,
    TaskBatch,
    TaskType,
    ToyConfig,
    ToyProblem,
    ToyProblemRegistry,
    fewshot,
    sinusoid,
)
from metakit.nn import MetaLinear, ParamSet, build_mlp
from metakit.training import (
    REPORT_COLUMNS,
    MamlConfig,
    MamlTrainer,
    PerformanceMonitor,
    TrainReport,
    adapt,
    evaluate,
    meta_train,
    outer_step,
    task_loss,
    write_report_csv,
    write_summary_json,
)
from metakit.training.maml import as_input


# ------------------------------------------------------------------
# Helpers
# ------------------------------------------------------------------


@dataclass
class SupportOnly:
    """Minimal support source for adapt()."""

    inputs: np.ndarray
    targets: np.ndarray
    task_type: TaskType = TaskType.REGRESSION

    def train_arrays(self):
        return self.inputs, self.targets


@dataclass
class RecordingTask:
    """Wraps a SplitTask and logs which part is read, in order."""

    inner: object
    index: int
    events: list = field(default_factory=list)

    @property
    def task_type(self):
        return self.inner.task_type

    def train_arrays(self):
        self.events.append(("train", self.index))
        return self.inner.train_arrays()

    def test_arrays(self):
        self.events.append(("test", self.index))
        return self.inner.test_arrays()


class RecordingDataset(MetaDataset):
    def __init__(self, inner: MetaDataset, events: list):
        self.inner = inner
        self.events = events
        self.meta_split = inner.meta_split
        self.task_type = inner.task_type

    @property
    def num_tasks(self) -> int:
        return self.inner.num_tasks

    def _build_task(self, index: int) -> RecordingTask:
        return RecordingTask(self.inner.get_task(index), index, self.events)


def _single_task_batch(support, query) -> TaskBatch:
    return TaskBatch(
        train_inputs=support[0][None],
        train_targets=support[1][None],
        test_inputs=query[0][None],
        test_targets=query[1][None],
        descriptors=("task",),
        task_type=TaskType.REGRESSION,
    )


def _unflatten(template: ParamSet, vector: np.ndarray) -> ParamSet:
    entries, offset = {}, 0
    for path, tensor in template.items():
        entries[path] = Tensor(vector[offset : offset + tensor.size].reshape(tensor.shape))
        offset += tensor.size
    return ParamSet(entries)


def _flatten(params: ParamSet) -> np.ndarray:
    return np.concatenate([t.values.ravel() for t in params.values()])


def _composite_loss(module, alpha, support, query):
    """Query loss after one explicit inner step, as a function of the flat parameters."""

    def fn(vector: np.ndarray) -> float:
        params = _unflatten(module.named_parameters(), vector).watch(Graph())
        inner = task_loss(TaskType.REGRESSION, module(as_input(support[0]), params), support[1])
        grads = gradients(inner, list(params.values()))
        adapted = ParamSet(
            {p: Tensor(t.values - alpha * g.values) for (p, t), g in zip(params.items(), grads)}
        )
        return task_loss(TaskType.REGRESSION, module(as_input(query[0]), adapted), query[1]).item()

    return fn


@pytest.fixture
def regression_data(rng):
    support = (rng.normal(size=(6, 2)), rng.normal(size=(6, 1)))
    query = (rng.normal(size=(4, 2)), rng.normal(size=(4, 1)))
    return support, query


@pytest.fixture
def small_mlp():
    return build_mlp([2, 4, 1], "tanh", seed=3)


def _toy_train(num_tasks: int = 50, **kwargs):
    return sinusoid(5, meta_split="train", num_tasks=num_tasks, seed=1, **kwargs)


def _toy_test(num_tasks: int = 50):
    return sinusoid(5, meta_split="test", num_tasks=num_tasks, seed=1)


# ------------------------------------------------------------------
# Adaptation
# ------------------------------------------------------------------


class TestAdapt:
    """Inner-loop adaptation on the support set."""

    def test_linear_closed_form(self, rng):
        module = MetaLinear(3, 1, bias=False, seed=4)
        x = rng.normal(size=(8, 3))
        y = rng.normal(size=(8, 1))
        alpha = 0.05
        adapted = adapt(module, SupportOnly(x, y), MamlConfig(inner_lr=alpha))
        w = module.weight.values
        expected = w - alpha * (2 / len(x)) * ((x @ w.T - y).T @ x)
        np.testing.assert_allclose(adapted["weight"].values, expected, atol=1e-10, rtol=0)

    def test_zero_learning_rate_is_identity(self, small_mlp, regression_data):
        support, _ = regression_data
        adapted = adapt(small_mlp, SupportOnly(*support), MamlConfig(inner_lr=0.0))
        for path, tensor in small_mlp.named_parameters().items():
            assert np.array_equal(adapted[path].values, tensor.values)

    def test_multiple_steps(self, rng):
        module = MetaLinear(3, 1, bias=False, seed=4)
        x, y = rng.normal(size=(8, 3)), rng.normal(size=(8, 1))
        w = module.weight.values
        for _ in range(3):
            w = w - 0.05 * (2 / len(x)) * ((x @ w.T - y).T @ x)
        adapted = adapt(module, SupportOnly(x, y), MamlConfig(inner_lr=0.05, inner_steps=3))
        np.testing.assert_allclose(adapted["weight"].values, w, atol=1e-10, rtol=0)

    def test_support_loss_descends(self):
        module = build_mlp([1, 40, 40, 1], "tanh", seed=0)
        trainer = MamlTrainer(MamlConfig(inner_lr=0.01))
        dataset = sinusoid(10, meta_split="test", num_tasks=40, seed=2)
        improved = 0
        for task in dataset:
            x, y = task.train_arrays()
            before = task_loss(TaskType.REGRESSION, module(as_input(x)), y).item()
            adapted = trainer.adapt(module, task).detach()
            after = task_loss(TaskType.REGRESSION, module(as_input(x), adapted), y).item()
            improved += after < before
        assert improved >= 38

    def test_adapt_reads_only_the_support_set(self):
        events = []
        task = RecordingTask(_toy_test().get_task(0), 0, events)
        MamlTrainer(MamlConfig()).adapt(build_mlp([1, 8, 1], "tanh"), task)
        assert events == [("train", 0)]


# ------------------------------------------------------------------
# Outer gradients
# ------------------------------------------------------------------


class TestOuterGradient:
    """Gradients of the query loss through adaptation."""

    def test_zero_inner_lr_collapses_to_plain_gradient(self, small_mlp, regression_data, numeric_grad):
        support, query = regression_data
        trainer = MamlTrainer(MamlConfig(inner_lr=0.0))
        analytic = _flatten(trainer.outer_gradient(small_mlp, _single_task_batch(support, query)))

        def query_loss(vector):
            params = _unflatten(small_mlp.named_parameters(), vector)
            return task_loss(TaskType.REGRESSION, small_mlp(as_input(query[0]), params), query[1]).item()

        numeric = numeric_grad(query_loss, _flatten(small_mlp.named_parameters()))
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)

    def test_second_order_matches_composite_finite_differences(
        self, small_mlp, regression_data, numeric_grad
    ):
        support, query = regression_data
        alpha = 0.1
        trainer = MamlTrainer(MamlConfig(inner_lr=alpha))
        analytic = _flatten(trainer.outer_gradient(small_mlp, _single_task_batch(support, query)))
        numeric = numeric_grad(
            _composite_loss(small_mlp, alpha, support, query),
            _flatten(small_mlp.named_parameters()),
        )
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)

    def test_linear_unit_matches_composite_finite_differences(self, rng, numeric_grad):
        module = MetaLinear(2, 2, seed=9)
        support = (rng.normal(size=(1, 2)), rng.normal(size=(1, 2)))
        query = (rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
        trainer = MamlTrainer(MamlConfig(inner_lr=0.3))
        analytic = _flatten(trainer.outer_gradient(module, _single_task_batch(support, query)))
        numeric = numeric_grad(
            _composite_loss(module, 0.3, support, query), _flatten(module.named_parameters())
        )
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8)

    def test_first_order_differs_with_identical_forward_losses(self, small_mlp, regression_data):
        batch = _single_task_batch(*regression_data)
        second = MamlTrainer(MamlConfig(inner_lr=0.1, first_order=False))
        first = MamlTrainer(MamlConfig(inner_lr=0.1, first_order=True))
        a = second.step(small_mlp, batch)
        b = first.step(small_mlp, batch)
        assert a.outer_loss == pytest.approx(b.outer_loss, rel=1e-12)
        assert a.pre_adapt_loss == pytest.approx(b.pre_adapt_loss, rel=1e-12)
        grads_a = _flatten(second.outer_gradient(small_mlp, batch))
        grads_b = _flatten(first.outer_gradient(small_mlp, batch))
        assert np.linalg.norm(grads_a - grads_b) > 1e-6

    def test_first_order_equals_gradient_at_adapted_point(self, small_mlp, regression_data):
        support, query = regression_data
        trainer = MamlTrainer(MamlConfig(inner_lr=0.1, first_order=True))
        analytic = _flatten(trainer.outer_gradient(small_mlp, _single_task_batch(support, query)))
        adapted = adapt(small_mlp, SupportOnly(*support), MamlConfig(inner_lr=0.1, first_order=True))
        leaves = adapted.detach().watch(Graph())
        loss = task_loss(TaskType.REGRESSION, small_mlp(as_input(query[0]), leaves), query[1])
        expected = np.concatenate([g.values.ravel() for g in gradients(loss, list(leaves.values()))])
        np.testing.assert_allclose(analytic, expected, atol=1e-12)

    def test_batch_gradient_is_task_mean(self, rng, small_mlp):
        tasks = [
            ((rng.normal(size=(6, 2)), rng.normal(size=(6, 1))), (rng.normal(size=(4, 2)), rng.normal(size=(4, 1))))
            for _ in range(3)
        ]
        trainer = MamlTrainer(MamlConfig(inner_lr=0.1))
        singles = [_flatten(trainer.outer_gradient(small_mlp, _single_task_batch(*t))) for t in tasks]
        batch = TaskBatch(
            train_inputs=np.stack([t[0][0] for t in tasks]),
            train_targets=np.stack([t[0][1] for t in tasks]),
            test_inputs=np.stack([t[1][0] for t in tasks]),
            test_targets=np.stack([t[1][1] for t in tasks]),
            descriptors=("a", "b", "c"),
            task_type=TaskType.REGRESSION,
        )
        combined = _flatten(trainer.outer_gradient(small_mlp, batch))
        np.testing.assert_allclose(combined, np.mean(singles, axis=0), atol=1e-14)

    def test_step_is_plain_gradient_descent(self, small_mlp, regression_data):
        batch = _single_task_batch(*regression_data)
        trainer = MamlTrainer(MamlConfig(inner_lr=0.1, outer_lr=0.5))
        grads = trainer.outer_gradient(small_mlp, batch)
        updated = trainer.step(small_mlp, batch).module.named_parameters()
        for path, tensor in small_mlp.named_parameters().items():
            np.testing.assert_allclose(
                updated[path].values, tensor.values - 0.5 * grads[path].values, atol=1e-15
            )

    def test_outer_step_wrapper(self, small_mlp, regression_data):
        batch = _single_task_batch(*regression_data)
        loss, module = outer_step(small_mlp, batch, MamlConfig(inner_lr=0.1))
        assert math.isfinite(loss)
        assert module is not small_mlp

    def test_empty_batch(self, small_mlp):
        empty = TaskBatch(
            train_inputs=np.zeros((0, 1, 2)),
            train_targets=np.zeros((0, 1, 1)),
            test_inputs=np.zeros((0, 1, 2)),
            test_targets=np.zeros((0, 1, 1)),
            descriptors=(),
            task_type=TaskType.REGRESSION,
        )
        with pytest.raises(ContractError):
            MamlTrainer().step(small_mlp, empty)


# ------------------------------------------------------------------
# Meta-training
# ------------------------------------------------------------------


class TestMetaTrain:
    """Outer loop, records and determinism."""

    def test_two_steps_give_two_records(self):
        config = MamlConfig(total_outer_steps=2, meta_batch_size=3, eval_tasks=5)
        module, report = meta_train(_toy_train(), build_mlp([1, 10, 1], "tanh"), config, _toy_test())
        assert [r.step for r in report.records] == [0, 1]
        assert all(math.isfinite(r.outer_loss) for r in report.records)
        assert report.evaluation is not None and report.evaluation.num_tasks == 5
        assert report.losses() == [r.outer_loss for r in report.records]

    def test_zero_steps_returns_initial_module(self):
        initial = build_mlp([1, 10, 1], "tanh")
        module, report = meta_train(_toy_train(), initial, MamlConfig(total_outer_steps=0))
        assert report.records == []
        assert _flatten(module.named_parameters()).tolist() == _flatten(initial.named_parameters()).tolist()

    def test_runs_past_one_epoch(self):
        config = MamlConfig(total_outer_steps=7, meta_batch_size=4)
        _, report = meta_train(_toy_train(num_tasks=10), build_mlp([1, 5, 1], "tanh"), config)
        assert len(report.records) == 7

    def test_deterministic(self):
        config = MamlConfig(total_outer_steps=5, meta_batch_size=4, seed=3)
        a, ra = meta_train(_toy_train(), build_mlp([1, 10, 1], "tanh"), config)
        b, rb = meta_train(_toy_train(), build_mlp([1, 10, 1], "tanh"), config)
        assert ra.losses() == rb.losses()
        assert np.array_equal(_flatten(a.named_parameters()), _flatten(b.named_parameters()))

    def test_workers_do_not_change_results(self):
        serial = MamlConfig(total_outer_steps=4, meta_batch_size=4, num_workers=0)
        threaded = serial.model_copy(update={"num_workers": 3})
        a, ra = meta_train(_toy_train(), build_mlp([1, 10, 1], "tanh"), serial)
        b, rb = meta_train(_toy_train(), build_mlp([1, 10, 1], "tanh"), threaded)
        assert ra.losses() == rb.losses()
        assert np.array_equal(_flatten(a.named_parameters()), _flatten(b.named_parameters()))

    def test_memorises_a_single_line(self):
        config = ToyConfig(num_samples_per_task=10, num_tasks=1, line_probability=1.0, seed=21)
        dataset = ClassSplitter(5, 5, seed=0)(
            ToyProblemRegistry.create(ToyProblem.SINUSOID_AND_LINE, config, "test")
        )
        maml = MamlConfig(
            inner_lr=0.01, outer_lr=0.02, total_outer_steps=1000, meta_batch_size=1, eval_tasks=1
        )
        module, report = meta_train(dataset, MetaLinear(1, 1, seed=1), maml)
        summary = evaluate(dataset, module, maml)
        assert summary.post_loss_mean < 1e-2
        assert report.records[-1].outer_loss < report.records[0].outer_loss


class TestMamlConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"inner_lr": -0.1},
            {"outer_lr": 0.0},
            {"inner_steps": 0},
            {"meta_batch_size": 0},
            {"eval_tasks": 0},
            {"num_workers": -1},
        ],
    )
    def test_rejects_invalid(self, overrides):
        with pytest.raises(ValidationError):
            MamlConfig(**overrides)


# ------------------------------------------------------------------
# Evaluation
# ------------------------------------------------------------------


class TestEvaluate:
    """Adapt on support, score on query."""

    def test_rejects_train_split(self):
        with pytest.raises(ConfigurationError):
            evaluate(_toy_train(), build_mlp([1, 5, 1], "tanh"), MamlConfig())

    def test_zero_inner_lr_has_equal_pre_and_post(self):
        summary = evaluate(
            _toy_test(), build_mlp([1, 5, 1], "tanh"), MamlConfig(inner_lr=0.0, eval_tasks=10)
        )
        assert summary.pre_loss_mean == summary.post_loss_mean
        assert summary.improved_fraction == 0.0
        assert summary.pre_accuracy_mean is None

    def test_task_count_capped_by_dataset(self):
        summary = evaluate(_toy_test(num_tasks=3), build_mlp([1, 5, 1], "tanh"), MamlConfig())
        assert summary.num_tasks == 3

    def test_deterministic(self):
        config = MamlConfig(eval_tasks=8, seed=4)
        a = evaluate(_toy_test(), build_mlp([1, 5, 1], "tanh"), config)
        b = evaluate(_toy_test(), build_mlp([1, 5, 1], "tanh"), config)
        assert a == b

    def test_query_read_after_support(self):
        events = []
        dataset = RecordingDataset(_toy_test(num_tasks=20), events)
        MamlTrainer(MamlConfig(eval_tasks=6)).evaluate(dataset, build_mlp([1, 5, 1], "tanh"))
        indices = {i for _, i in events}
        assert len(indices) == 6
        for index in indices:
            assert [part for part, i in events if i == index] == ["train", "test"]

    def test_uninformative_classifier_sits_at_chance(self, corpus):
        root, manifest = corpus
        dataset = fewshot(
            root, ways=5, shots=1, test_shots=3, meta_split="test", manifest=manifest, seed=0
        )
        module = build_mlp([784, 16, 5], "relu", seed=2)
        params = module.named_parameters()
        # constant logits: every query is predicted as label 0
        zeroed = ParamSet(
            {p: Tensor(np.zeros(t.shape)) if p.startswith("2.") else t for p, t in params.items()}
        )
        module = module.replace_parameters(zeroed)
        summary = evaluate(dataset, module, MamlConfig(inner_lr=0.0, eval_tasks=200))
        assert summary.num_tasks == 200
        assert summary.post_accuracy_mean == pytest.approx(0.2, abs=1e-12)
        assert summary.post_loss_mean == pytest.approx(math.log(5), abs=1e-12)

    def test_classification_adaptation_runs(self, corpus):
        root, manifest = corpus
        dataset = fewshot(root, ways=5, shots=1, test_shots=2, meta_split="val", manifest=manifest)
        summary = evaluate(
            dataset, build_mlp([784, 16, 5], "relu", seed=2), MamlConfig(inner_lr=0.4, eval_tasks=10)
        )
        assert 0.0 <= summary.post_accuracy_mean <= 1.0
        assert summary.meta_split is MetaSplit.VAL


# ------------------------------------------------------------------
# Reports
# ------------------------------------------------------------------


class TestReports:
    """CSV / JSON run outputs."""

    @pytest.fixture
    def report(self) -> TrainReport:
        config = MamlConfig(total_outer_steps=3, meta_batch_size=2)
        _, report = meta_train(_toy_train(), build_mlp([1, 5, 1], "tanh"), config)
        return report

    def test_csv_header_and_rows(self, report, tmp_path):
        path = write_report_csv(report, tmp_path / "report.csv")
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == list(REPORT_COLUMNS)
        assert rows[0] == ["step", "outer_loss", "pre_adapt_loss", "post_adapt_loss", "wall_ms"]
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
        assert float(rows[1][1]) == report.records[0].outer_loss

    def test_summary_json(self, report, tmp_path):
        path = write_summary_json(report, tmp_path / "summary.json")
        restored = TrainReport.model_validate(json.loads(path.read_text()))
        assert restored.losses() == report.losses()
        assert restored.config == report.config

    def test_performance_snapshot(self):
        snapshot = PerformanceMonitor().snapshot("test")
        assert re.fullmatch(r"\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}\.\d{3}", snapshot.time)
        assert re.fullmatch(r"\d+\.\d{2} MB", snapshot.memory)
        assert snapshot.threads >= 1

    def test_performance_times_are_relative_to_start(self):
        monitor = PerformanceMonitor()
        sum(i * i for i in range(200_000))
        first = monitor.snapshot("a")
        second = monitor.snapshot("b")
        assert 0.0 <= first.elapsed_s <= second.elapsed_s
        assert 0.0 <= first.cpu_s <= second.cpu_s


# ------------------------------------------------------------------
# Desk-scale runs (deselected by default)
# ------------------------------------------------------------------


@pytest.mark.slow
class TestDeskScale:
    def test_sinusoid_meta_training_beats_initialisation(self):
        # 5-shot, alpha 0.01, plain gradient descent at 0.001, meta-batch 4, 2000 steps.
        # measured post-adaptation mse: 4.853 untrained, 4.649 trained
        train = sinusoid(5, meta_split="train", seed=0)
        test = sinusoid(5, meta_split="test", seed=0)
        config = MamlConfig(
            inner_lr=0.01,
            outer_lr=0.001,
            total_outer_steps=2000,
            meta_batch_size=4,
            eval_tasks=100,
            seed=0,
        )
        trainer = MamlTrainer(config)
        module = build_mlp([1, 40, 40, 1], "tanh", seed=0)
        baseline = trainer.evaluate(test, module)
        _, report = trainer.meta_train(train, module, test)
        assert report.evaluation.num_tasks == 100
        assert report.evaluation.post_loss_mean < baseline.post_loss_mean

    def test_fewshot_five_way_one_shot_accuracy(self, corpus):
        root, manifest = corpus
        train = fewshot(root, 5, 1, 15, meta_split="train", manifest=manifest)
        test = fewshot(root, 5, 1, 15, meta_split="test", manifest=manifest)
        config = MamlConfig(
            inner_lr=0.4, outer_lr=0.01, total_outer_steps=2000, meta_batch_size=8, eval_tasks=200
        )
        _, report = MamlTrainer(config).meta_train(
            train, build_mlp([784, 64, 64, 5], "relu", seed=0), test
        )
        assert report.evaluation.post_accuracy_mean >= 0.6
