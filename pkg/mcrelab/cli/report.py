__all__ = ["RunReport", "plot_spec"]

import csv
import json
import logging
import os

import numpy as np

REPORT_NAME = "report.json"


def _plain(value):
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def plot_spec(csv_name, header):
    """
    Declarative line-plot spec of a CSV: first column on x, second on y.
    """
    return {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "data": {"url": csv_name, "format": {"type": "csv"}},
        "mark": "line",
        "encoding": {
            "x": {"field": header[0], "type": "quantitative"},
            "y": {"field": header[1], "type": "quantitative"},
        },
    }


class RunReport:
    """
    Resolved config, seed, derived constants, CSV references and the pass/fail
    summary of one subcommand run, written under <output>/<command>/.
    """
    logger = logging.getLogger("mcrelab.RunReport")

    def __init__(self, command, config, seed, output, emit_plots=False):
        """
        :param config: Fully resolved config tree
        :type config: dict
        :type seed: int
        :param output: Output root directory
        """
        self.command = command
        self.config = config
        self.seed = int(seed)
        self.directory = os.path.join(output, command)
        self.emit_plots = emit_plots
        self.constants = {}
        self.csv_files = {}
        self.checks = {}
        self.failure = None
        os.makedirs(self.directory, exist_ok=True)

    @classmethod
    def _log(cls, msg):
        cls.logger.debug("RunReport: %s", msg)

    @property
    def passed(self):
        return self.failure is None and all(self.checks.values())

    @property
    def failed_checks(self):
        return sorted(name for name, ok in self.checks.items() if not ok)

    def check(self, name, passed):
        # repeated names keep the worst outcome
        self.checks[name] = bool(passed) and self.checks.get(name, True)

    def write_csv(self, name, header, rows):
        """
        :return: The file name, relative to the report directory
        """
        file_name = "{}.csv".format(name)
        with open(os.path.join(self.directory, file_name), "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_plain(v) for v in row])
        self.csv_files[name] = file_name
        if self.emit_plots:
            with open(os.path.join(self.directory, "{}.plot.json".format(name)), "w") as f:
                json.dump(plot_spec(file_name, header), f, indent=2, sort_keys=True)
        self._log("wrote {}".format(file_name))
        return file_name

    def as_dict(self):
        return _plain({
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "constants": self.constants,
            "csv": self.csv_files,
            "checks": self.checks,
            "failure": self.failure,
            "passed": self.passed,
        })

    def save(self):
        path = os.path.join(self.directory, REPORT_NAME)
        with open(path, "w") as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def summary(self):
        if self.passed:
            return "{}: PASS".format(self.command)
        failed = [self.failure] if self.failure else self.failed_checks
        return "{}: FAIL ({})".format(self.command, ", ".join(failed))
