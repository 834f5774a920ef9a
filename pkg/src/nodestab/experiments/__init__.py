"""Desk-scale studies: teacher-student regression, learned-pole placement
on linear references, and the solver-swap instability demo."""

from .data import (
    Dataset,
    LinearSystem,
    build_fixed_step_dataset,
    build_teacher_dataset,
    dataset_fingerprint,
    gen_pwm_input,
    make_random_linear_system,
    make_teacher,
    simulate_teacher,
)
from .training import TrainConfig, TrainResult, train_student, window_loss_and_grads
from .studies import (
    LinearPoleConfig,
    PoleStudyResult,
    SolverSwapConfig,
    SolverSwapResult,
    StudyResult,
    TeacherStudentConfig,
    run_linear_pole_study,
    run_solver_swap_demo,
    run_teacher_student_study,
)

__all__ = [
    "Dataset",
    "LinearSystem",
    "LinearPoleConfig",
    "PoleStudyResult",
    "SolverSwapConfig",
    "SolverSwapResult",
    "StudyResult",
    "TeacherStudentConfig",
    "TrainConfig",
    "TrainResult",
    "build_fixed_step_dataset",
    "build_teacher_dataset",
    "dataset_fingerprint",
    "gen_pwm_input",
    "make_random_linear_system",
    "make_teacher",
    "run_linear_pole_study",
    "run_solver_swap_demo",
    "run_teacher_student_study",
    "simulate_teacher",
    "train_student",
    "window_loss_and_grads",
]
