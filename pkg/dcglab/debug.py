import textwrap
from typing import Any


class Debugger:
    """
    Prints trace blocks for an iterative solver, one block per step.
    """

    def __init__(self, name: str) -> None:
        self.name = name.upper()

    def step(self, title: str, **values: Any) -> None:
        lines = "\n".join(f"{key}: {value!r}" for key, value in values.items())
        print()
        print(f"=== {self.name} DEBUGGER ===")
        print(f"{title}:")
        print()
        print(textwrap.indent(lines, "  "))
        print()
        print(f"=== END {self.name} DEBUGGER ===")
