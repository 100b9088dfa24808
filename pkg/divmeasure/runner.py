"""
Experiment runner.
Runs one experiment or the acceptance suite and writes report.json plus the
CSV tables and artifacts each experiment produced.
"""
import asyncio
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import Config
from .errors import ConfigError, DivMeasureError
from .experiments import ACCEPTANCE_SUITE, EXPERIMENTS
from .export import table_to_csv, write_json

logger = logging.getLogger("divmeasure.runner")


class ExperimentRunner:
    def __init__(self, config, out_dir=None, seed=None, workers=None):
        self.config = config
        self.out_dir = Path(out_dir or config.output.directory or Config.OUTPUT_DIR)
        self.seed = Config.SEED if seed is None else int(seed)
        self.workers = workers or Config.WORKERS
        self.reports = {}  # label -> report dict

    def _execute(self, name, config=None, label=None):
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose one of {list(EXPERIMENTS)} or all")
        label = label or name
        experiment = EXPERIMENTS[name](config or self.config, seed=self.seed)
        print(f"🚀 {label} started")
        start = time.perf_counter()
        try:
            report = experiment.execute()
        except ConfigError:
            raise
        except DivMeasureError as e:
            print(f"❌ {label}: {type(e).__name__}: {e}")
            experiment.result = None
            report = experiment.get_report_info()
            report.update({"status": "error", "error": {"type": type(e).__name__, "message": str(e)}})
            experiment.tables, experiment.artifacts = {}, {}
        marker = "✅" if report["status"] == "pass" else "❌"
        print(f"{marker} {label}: {report['status']} ({time.perf_counter() - start:.1f} s)")
        for check in report.get("checks", []):
            if not check["pass"]:
                logger.warning(f"⚠️ {label}: {check['name']} = {check['value']} (limit {check['limit']})")
        return experiment, report

    def _execute_case(self, case):
        config = self.config.for_case(shape=case.shape, field=case.field)
        experiment, report = self._execute(case.experiment, config, case.label)
        report["case"] = case.label
        if case.expect_failure:
            failed = {c["name"] for c in report.get("checks", []) if not c["pass"]}
            ok = report["status"] != "error" and failed == {case.expect_failure}
            report["expected_failure"] = case.expect_failure
            report["status"] = "pass" if ok else "fail"
            print(f"{'✅' if ok else '❌'} {case.label}: {case.expect_failure} "
                  f"{'failed as expected' if ok else 'did not fail alone'}")
        return experiment, report

    def _write(self, experiment, report, directory):
        directory.mkdir(parents=True, exist_ok=True)
        for stem, table in experiment.tables.items():
            table_to_csv(table, directory / f"{stem}.csv")
        for filename, writer in experiment.artifacts.items():
            writer(directory / filename)
        logger.debug(f"{len(experiment.tables)} tables, {len(experiment.artifacts)} artifacts in {directory}")

    def run(self, name):
        """Runs one experiment; report.json and tables go straight into out_dir."""
        experiment, report = self._execute(name)
        self._write(experiment, report, self.out_dir)
        write_json(report, self.out_dir / "report.json")
        self.reports[name] = report
        return report

    async def _run_suite(self, cases):
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            tasks = [loop.run_in_executor(pool, self._execute_case, case) for case in cases]
            # gather keeps suite order whatever finishes first
            return await asyncio.gather(*tasks)

    def run_all(self, cases=ACCEPTANCE_SUITE):
        """Every case of the acceptance suite, one subdirectory each, one combined report.json."""
        print(f"🚀 running {len(cases)} cases with {self.workers} worker(s)")
        results = asyncio.run(self._run_suite(cases))
        for case, (experiment, report) in zip(cases, results):
            self._write(experiment, report, self.out_dir / case.label)
            write_json(report, self.out_dir / case.label / "report.json")
            self.reports[case.label] = report
        summary = {
            "status": "pass" if all(r["status"] == "pass" for r in self.reports.values()) else "fail",
            "experiments": [self.reports[case.label] for case in cases],
        }
        write_json(summary, self.out_dir / "report.json")
        passed = sum(r["status"] == "pass" for r in self.reports.values())
        print(f"🛑 done: {passed}/{len(self.reports)} passed")
        return summary

    @property
    def passed(self):
        return bool(self.reports) and all(r["status"] == "pass" for r in self.reports.values())
