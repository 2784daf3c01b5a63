"""
Gradient-based meta-learning: inner-loop adaptation and outer-loop updates.

For every task the stored parameters W are watched on a fresh graph, adapted
on the support set with substituted gradient steps
``W' = W - α ∇_W L_support(W)``, and the query loss ``L_query(W')`` is
differentiated back to W through the adaptation. With ``first_order`` the
inner gradients are constants, so only the identity path from W' to W
remains. Outer updates are plain gradient descent on the task-mean query
loss.

Tasks are independent graphs and may be processed on worker threads; the
per-task gradients are always summed in task order.

Usage:
    trainer = MamlTrainer(MamlConfig(inner_lr=0.01, outer_lr=0.001))
    module, report = trainer.meta_train(train_ds, build_mlp([1, 40, 40, 1], "tanh"))
    summary = trainer.evaluate(test_ds, module)
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import islice
from typing import Callable, Iterable, Protocol, Sequence, TypeVar

import numpy as np

from metakit.autodiff import gradients
from metakit.autodiff import ops
from metakit.autodiff.tensor import Graph, Tensor
from metakit.core.errors import ConfigurationError, ContractError
from metakit.core.logging import get_logger
from metakit.data.loader import BatchMetaDataLoader, TaskBatch, task_indices
from metakit.data.models import MetaSplit, TaskType
from metakit.data.tasks import MetaDataset, SplitTask
from metakit.nn.modules import MetaModule
from metakit.nn.params import ParamSet, sgd_step
from metakit.training.models import EvalSummary, MamlConfig, StepRecord, TrainReport

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class SupportSource(Protocol):
    """Anything that can hand out a task's support arrays."""

    task_type: TaskType

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]: ...


# ------------------------------------------------------------------
# Losses
# ------------------------------------------------------------------


def as_input(inputs: np.ndarray) -> Tensor:
    """Flatten ``[n, ...]`` examples to the ``[n, features]`` matrix a MetaLinear takes."""
    return Tensor(np.reshape(inputs, (inputs.shape[0], -1)))


def task_loss(task_type: TaskType, predictions: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared error for regression, softmax cross-entropy for classification."""
    if task_type is TaskType.REGRESSION:
        return ops.mse(predictions, Tensor(np.reshape(targets, predictions.shape)))
    return ops.softmax_cross_entropy(predictions, targets)


def accuracy(logits: Tensor, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(logits.values, axis=1) == labels))


# ------------------------------------------------------------------
# Per-task results
# ------------------------------------------------------------------


@dataclass(frozen=True)
class TaskOutcome:
    """One task's contribution to an outer step."""

    outer_loss: float
    pre_adapt_loss: float
    post_adapt_loss: float
    grads: list[np.ndarray]


@dataclass(frozen=True)
class OuterStepResult:
    outer_loss: float
    pre_adapt_loss: float
    post_adapt_loss: float
    grad_norm: float
    module: MetaModule


@dataclass(frozen=True)
class TaskMetrics:
    pre_loss: float
    post_loss: float
    pre_accuracy: float | None
    post_accuracy: float | None


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


# ------------------------------------------------------------------
# Trainer
# ------------------------------------------------------------------


class MamlTrainer:
    """
    Runs adaptation, outer steps, meta-training and evaluation for one config.

    Public API:
      - adapt(module, task, params=None)  → adapted ParamSet
      - step(module, batch)               → OuterStepResult
      - meta_train(dataset, module, ...)  → (trained module, TrainReport)
      - evaluate(dataset, module)         → EvalSummary
    """

    def __init__(self, config: MamlConfig | None = None):
        self.config = config or MamlConfig()

    # -- Inner loop ----------------------------------------------------

    def _inner_loop(
        self,
        module: MetaModule,
        params: ParamSet,
        inputs: Tensor,
        targets: np.ndarray,
        task_type: TaskType,
        create_graph: bool,
    ) -> tuple[ParamSet, float]:
        """``inner_steps`` substituted SGD steps; returns the result and the initial loss."""
        current = params
        initial_loss = float("nan")
        for step in range(self.config.inner_steps):
            loss = task_loss(task_type, module(inputs, current), targets)
            if step == 0:
                initial_loss = loss.item()
            grads = gradients(loss, list(current.values()), create_graph=create_graph)
            current = sgd_step(
                current,
                ParamSet(dict(zip(current.paths(), grads))),
                self.config.inner_lr,
                create_graph=create_graph,
            )
        return current, initial_loss

    def adapt(
        self, module: MetaModule, task: SupportSource, params: ParamSet | None = None
    ) -> ParamSet:
        """
        Adapt *params* (default: the module's stored parameters, watched on a
        fresh graph) to the support set of *task*.

        Only ``task.train_arrays()`` is read.
        """
        if params is None:
            params = module.named_parameters().watch(Graph())
        inputs, targets = task.train_arrays()
        adapted, _ = self._inner_loop(
            module,
            params,
            as_input(inputs),
            targets,
            task.task_type,
            create_graph=not self.config.first_order,
        )
        return adapted

    # -- Outer step ----------------------------------------------------

    def _task_outcome(
        self,
        module: MetaModule,
        task_type: TaskType,
        support: tuple[np.ndarray, np.ndarray],
        query: tuple[np.ndarray, np.ndarray],
    ) -> TaskOutcome:
        params = module.named_parameters().watch(Graph())
        support_inputs = as_input(support[0])
        adapted, pre_loss = self._inner_loop(
            module,
            params,
            support_inputs,
            support[1],
            task_type,
            create_graph=not self.config.first_order,
        )
        outer = task_loss(task_type, module(as_input(query[0]), adapted), query[1])
        grads = gradients(outer, list(params.values()))
        post_loss = task_loss(task_type, module(support_inputs, adapted.detach()), support[1])
        return TaskOutcome(
            outer_loss=outer.item(),
            pre_adapt_loss=pre_loss,
            post_adapt_loss=post_loss.item(),
            grads=[g.values for g in grads],
        )

    def _map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        if self.config.num_workers == 0:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.num_workers) as pool:
            return list(pool.map(fn, items))

    def _outcomes(self, module: MetaModule, batch: TaskBatch) -> list[TaskOutcome]:
        if batch.batch_size == 0:
            raise ContractError("outer step needs a non-empty batch")

        def run(j: int) -> TaskOutcome:
            return self._task_outcome(
                module,
                batch.task_type,
                (batch.train_inputs[j], batch.train_targets[j]),
                (batch.test_inputs[j], batch.test_targets[j]),
            )

        return self._map(run, range(batch.batch_size))

    @staticmethod
    def _mean_grads(outcomes: list[TaskOutcome], count: int) -> list[np.ndarray]:
        # summed in task order so threading never changes the result
        return [sum(o.grads[i] for o in outcomes) / len(outcomes) for i in range(count)]

    def outer_gradient(self, module: MetaModule, batch: TaskBatch) -> ParamSet:
        """Task-mean gradient of the query loss w.r.t. the stored parameters."""
        paths = module.named_parameters().paths()
        mean_grads = self._mean_grads(self._outcomes(module, batch), len(paths))
        return ParamSet({path: Tensor(g) for path, g in zip(paths, mean_grads)})

    def step(self, module: MetaModule, batch: TaskBatch) -> OuterStepResult:
        """One outer step over *batch*; returns the updated module and step statistics."""
        outcomes = self._outcomes(module, batch)
        stored = module.named_parameters()
        mean_grads = self._mean_grads(outcomes, len(stored))
        updated = ParamSet(
            {
                path: Tensor(tensor.values - self.config.outer_lr * grad)
                for (path, tensor), grad in zip(stored.items(), mean_grads)
            }
        )
        return OuterStepResult(
            outer_loss=float(np.mean([o.outer_loss for o in outcomes])),
            pre_adapt_loss=float(np.mean([o.pre_adapt_loss for o in outcomes])),
            post_adapt_loss=float(np.mean([o.post_adapt_loss for o in outcomes])),
            grad_norm=float(np.sqrt(sum(float(np.sum(g**2)) for g in mean_grads))),
            module=module.replace_parameters(updated),
        )

    # -- Meta-training -------------------------------------------------

    def meta_train(
        self,
        dataset: MetaDataset[SplitTask],
        module: MetaModule,
        eval_dataset: MetaDataset[SplitTask] | None = None,
    ) -> tuple[MetaModule, TrainReport]:
        """
        Run ``total_outer_steps`` outer steps over seeded batches of *dataset*.

        The report's ``evaluation`` is filled in when *eval_dataset* is given.
        """
        config = self.config
        loader = BatchMetaDataLoader(
            dataset, batch_size=config.meta_batch_size, shuffle=True, seed=config.seed
        )
        records: list[StepRecord] = []
        epoch = 0
        logger.info(
            "Meta-training: %d outer steps, meta-batch %d, α=%g, outer lr=%g, first_order=%s",
            config.total_outer_steps,
            config.meta_batch_size,
            config.inner_lr,
            config.outer_lr,
            config.first_order,
        )
        while len(records) < config.total_outer_steps:
            remaining = config.total_outer_steps - len(records)
            for batch in islice(loader.iter_epoch(epoch), remaining):
                started = time.perf_counter()
                result = self.step(module, batch)
                module = result.module
                record = StepRecord(
                    step=len(records),
                    outer_loss=result.outer_loss,
                    pre_adapt_loss=result.pre_adapt_loss,
                    post_adapt_loss=result.post_adapt_loss,
                    wall_ms=(time.perf_counter() - started) * 1000.0,
                )
                records.append(record)
                if record.step % config.log_every == 0:
                    logger.info(
                        "Outer step %d: outer=%.6f pre=%.6f post=%.6f |g|=%.3e",
                        record.step,
                        record.outer_loss,
                        record.pre_adapt_loss,
                        record.post_adapt_loss,
                        result.grad_norm,
                    )
            epoch += 1

        evaluation = self.evaluate(eval_dataset, module) if eval_dataset is not None else None
        return module, TrainReport(config=config, records=records, evaluation=evaluation)

    # -- Evaluation ----------------------------------------------------

    def _task_metrics(self, module: MetaModule, task: SplitTask) -> TaskMetrics:
        # adaptation reads the support set only; query arrays are loaded afterwards
        stored = module.named_parameters()
        support_inputs, support_targets = task.train_arrays()
        adapted, _ = self._inner_loop(
            module,
            stored.watch(Graph()),
            as_input(support_inputs),
            support_targets,
            task.task_type,
            create_graph=False,
        )
        adapted = adapted.detach()
        query_inputs, query_targets = task.test_arrays()
        inputs = as_input(query_inputs)
        before = module(inputs, stored)
        after = module(inputs, adapted)
        classification = task.task_type is TaskType.CLASSIFICATION
        return TaskMetrics(
            pre_loss=task_loss(task.task_type, before, query_targets).item(),
            post_loss=task_loss(task.task_type, after, query_targets).item(),
            pre_accuracy=accuracy(before, query_targets) if classification else None,
            post_accuracy=accuracy(after, query_targets) if classification else None,
        )

    def evaluate(self, dataset: MetaDataset[SplitTask], module: MetaModule) -> EvalSummary:
        """
        Adapt on the support set of ``eval_tasks`` seeded tasks and report
        query metrics before and after adaptation.
        """
        if dataset.meta_split is MetaSplit.TRAIN:
            raise ConfigurationError("evaluation needs a val or test meta-split, got train")
        count = min(self.config.eval_tasks, dataset.num_tasks)
        indices = list(islice(task_indices(dataset.num_tasks, True, self.config.seed, 0), count))
        metrics = self._map(lambda i: self._task_metrics(module, dataset.get_task(i)), indices)

        pre_loss = _mean_std([m.pre_loss for m in metrics])
        post_loss = _mean_std([m.post_loss for m in metrics])
        summary = EvalSummary(
            meta_split=dataset.meta_split,
            num_tasks=count,
            pre_loss_mean=pre_loss[0],
            pre_loss_std=pre_loss[1],
            post_loss_mean=post_loss[0],
            post_loss_std=post_loss[1],
            improved_fraction=float(np.mean([m.post_loss < m.pre_loss for m in metrics])),
        )
        if dataset.task_type is TaskType.CLASSIFICATION:
            pre_acc = _mean_std([m.pre_accuracy for m in metrics])
            post_acc = _mean_std([m.post_accuracy for m in metrics])
            summary = summary.model_copy(
                update={
                    "pre_accuracy_mean": pre_acc[0],
                    "pre_accuracy_std": pre_acc[1],
                    "post_accuracy_mean": post_acc[0],
                    "post_accuracy_std": post_acc[1],
                }
            )
        logger.info(
            "Evaluation on %s (%d tasks): post loss %.6f ± %.6f (pre %.6f), improved %.0f%%",
            summary.meta_split.value,
            count,
            summary.post_loss_mean,
            summary.post_loss_std,
            summary.pre_loss_mean,
            100.0 * summary.improved_fraction,
        )
        return summary


# ------------------------------------------------------------------
# Functional entry points
# ------------------------------------------------------------------


def adapt(module: MetaModule, task: SupportSource, config: MamlConfig) -> ParamSet:
    return MamlTrainer(config).adapt(module, task)


def outer_step(
    module: MetaModule, batch: TaskBatch, config: MamlConfig
) -> tuple[float, MetaModule]:
    result = MamlTrainer(config).step(module, batch)
    return result.outer_loss, result.module


def meta_train(
    dataset: MetaDataset[SplitTask],
    module: MetaModule,
    config: MamlConfig,
    eval_dataset: MetaDataset[SplitTask] | None = None,
) -> tuple[MetaModule, TrainReport]:
    return MamlTrainer(config).meta_train(dataset, module, eval_dataset)


def evaluate(
    dataset: MetaDataset[SplitTask], module: MetaModule, config: MamlConfig
) -> EvalSummary:
    return MamlTrainer(config).evaluate(dataset, module)
