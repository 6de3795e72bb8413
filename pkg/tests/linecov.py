"""Minimal line-coverage collector built on sys.settrace.

The package mirror offers no coverage tooling, so the 70% gate is measured
here: executable lines are derived from the ast (statement linenos minus
docstrings and ``pragma: no cover`` lines), executed lines come from a
trace hook restricted to the package directory. Files never imported count
as fully unexecuted.
"""

from __future__ import annotations

import ast
import json
import os
import sys
import threading


class LineCollector:
    def __init__(self, package_root: str, report_path: str):
        self.root = os.path.abspath(package_root) + os.sep
        self.report_path = report_path
        self.executed: dict[str, set[int]] = {}

    # -- tracing -------------------------------------------------------------

    def _global_trace(self, frame, event, arg):
        filename = frame.f_code.co_filename
        if not filename.startswith(self.root):
            return None
        lines = self.executed.setdefault(filename, set())

        def local_trace(frame, event, arg):
            if event == "line":
                lines.add(frame.f_lineno)
            return local_trace

        if event == "call":
            lines.add(frame.f_lineno)
        return local_trace

    def start(self) -> None:
        threading.settrace(self._global_trace)
        sys.settrace(self._global_trace)

    def stop_and_write(self) -> None:
        sys.settrace(None)
        threading.settrace(None)
        report = self.build_report()
        with open(self.report_path, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)

    # -- reporting ------------------------------------------------------------

    def build_report(self) -> dict:
        files = {}
        total_executable = 0
        total_executed = 0
        for path in sorted(self._package_files()):
            executable = executable_lines(path)
            executed = self.executed.get(path, set()) & executable
            files[os.path.relpath(path, self.root)] = {
                "executable": len(executable),
                "executed": len(executed),
                "missing": sorted(executable - executed),
            }
            total_executable += len(executable)
            total_executed += len(executed)
        percent = 100.0 * total_executed / total_executable if total_executable else 100.0
        return {
            "linePercent": round(percent, 2),
            "executable": total_executable,
            "executed": total_executed,
            "files": files,
        }

    def _package_files(self) -> list[str]:
        found = []
        for dirpath, _dirnames, filenames in os.walk(self.root):
            for name in filenames:
                if name.endswith(".py"):
                    found.append(os.path.join(dirpath, name))
        return found


def executable_lines(path: str) -> set[int]:
    with open(path, "r", encoding="utf-8") as handle:
        source = handle.read()
    tree = ast.parse(source)
    pragma_lines = {
        i + 1 for i, line in enumerate(source.splitlines()) if "pragma: no cover" in line
    }
    lines: set[int] = set()
    for node in ast.walk(tree):
        if not isinstance(node, ast.stmt):
            continue
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant) and isinstance(node.value.value, str):
            continue  # docstrings / bare strings
        if node.lineno in pragma_lines:
            continue
        lines.add(node.lineno)
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            for decorator in node.decorator_list:
                lines.add(decorator.lineno)
    return lines
