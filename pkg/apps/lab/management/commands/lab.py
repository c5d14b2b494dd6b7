import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import LabError
from apps.lab.models import Subcommand
from apps.lab.services import LabRunner
from apps.runstore.services import RunStoreService

logger = logging.getLogger(__name__)

HELP = {
    Subcommand.SCATTER: "Jost solutions and scattering coefficients, with identity and barrier checks",
    Subcommand.DFT_CHECK: "Distorted Fourier basis diagnostics and pseudo-differential norm probes",
    Subcommand.SOLVE: "Cubic NLS evolution with mass and energy bookkeeping",
    Subcommand.DECAY_FIT: "Decay-rate fits of the linear flow",
    Subcommand.MEASURE_CHECK: "Singular and regular decomposition of the nonlinear spectral measure",
    Subcommand.ASYMPTOTICS: "Profile, modified scattering and stationary-phase checks",
    Subcommand.DELTA_LIMIT: "Convergence of narrow barriers to the delta potential",
}


class Command(BaseCommand):
    help = "Run one spectral laboratory experiment and write its artifacts and manifest"

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)
        for name in Subcommand.CHOICES:
            sub = subparsers.add_parser(name, help=HELP[name])
            sub.add_argument("--config", help="Run config file (section.key = value lines); defaults apply when omitted")
            sub.add_argument("--out", help="Run directory (default: LAB_OUTPUT_DIR/<subcommand>)")
            sub.add_argument("--quiet", action="store_true", help="Only log warnings and errors to the console")

    def handle(self, *args, **options):
        command = options["subcommand"]
        if options.get("quiet"):
            self._quiet_console()
        out = Path(options.get("out") or settings.LAB_OUTPUT_DIR / command)

        try:
            config = RunStoreService.load_config(options["config"]) if options.get("config") else RunStoreService.parse_config({})
            run = LabRunner(config).execute(command)
            RunStoreService.write_report(out, run.artifacts, command=command, config=config, timings=run.timings, checks=run.checks, passed=run.passed)
        except LabError as e:
            logger.error(f"{command} failed: {e}")
            raise CommandError(str(e), returncode=e.exit_code) from e

        for name, ok in run.checks.items():
            line = f"{name}: {'PASS' if ok else 'FAIL'}"
            self.stdout.write(self.style.SUCCESS(line) if ok else self.style.ERROR(line))
        self.stdout.write(f"Wrote {len(run.artifacts)} outputs to {out}")

        if not run.passed:
            raise CommandError(f"{command}: failed checks {', '.join(run.failed_checks)}", returncode=1)

    @staticmethod
    def _quiet_console():
        for name in settings.LOGGING["loggers"]:
            for handler in logging.getLogger(name).handlers:
                if handler.name == "console":
                    handler.setLevel(logging.WARNING)
