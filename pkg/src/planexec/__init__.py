"""planexec: execute natural-language plans with IF/GOTO/FORALL control flow,
tool dispatch, generated-code execution, and constraint validation."""

from .compiler import PlanSource, compile_plan
from .executor import Engine
from .model import Instance, Task
from .runner import eval_dataset, execute_run
from .staging import BackendConfig, RunConfig, ToolRegistry

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "Engine",
    "Instance",
    "PlanSource",
    "RunConfig",
    "Task",
    "ToolRegistry",
    "compile_plan",
    "eval_dataset",
    "execute_run",
    "__version__",
]
