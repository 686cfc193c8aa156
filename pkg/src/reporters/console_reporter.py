"""Console reporter for validation, tuning, selection and evaluation results."""

from collections.abc import Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src.analyzers.decomposition import RoiDecay
from src.analyzers.tuning import CVResult
from src.models.dwi_study import StudyIssues
from src.models.evaluation_report import AblationReport, MetricsReport
from src.models.features import SelectionReport


class ConsoleReporter:
    """Reporter for displaying pipeline results in the console using Rich formatting."""

    def __init__(self):
        """Initialize the console reporter."""
        self.console = Console()

    def _header(self, title: str) -> None:
        self.console.print()
        self.console.print(Panel.fit(f"[bold cyan]{title}[/bold cyan]", border_style="cyan"))
        self.console.print()

    def display_validation(self, issues: Sequence[StudyIssues]) -> None:
        """Display one row per study violation.

        Args:
            issues: Per-(patient, time point) validation results
        """
        self._header("Cohort Validation")
        bad = [i for i in issues if not i.is_valid()]
        checked = len(issues)
        if not bad:
            self.console.print(f"[bold green]All {checked} studies passed validation.[/bold green]")
            return

        table = Table(title=f"Violations ({len(bad)} of {checked} studies)")
        table.add_column("Patient", style="white", width=12)
        table.add_column("Time point", style="white", width=10)
        table.add_column("Field", style="bold yellow", width=10)
        table.add_column("Rule", style="bold red", width=18)
        table.add_column("Message", style="white")
        for issue in bad:
            for v in issue.violations:
                table.add_row(issue.patient_id, issue.time_point.value, v.field, v.rule, v.message)
        self.console.print(table)

    def display_cv(self, cv: CVResult, limit: int = 10) -> None:
        """Display the best cross-validated configurations, best first."""
        self._header("Cross-Validation")
        order = sorted(range(len(cv.configs)), key=lambda i: (-cv.mean_auc[i], i))
        table = Table(title=f"Grid results ({len(cv.configs)} configurations)")
        table.add_column("#", style="white", width=4)
        table.add_column("Mean AUC", style="bold yellow", width=9)
        table.add_column("max_depth", width=9)
        table.add_column("min_child_weight", width=16)
        table.add_column("subsample", width=9)
        table.add_column("k_features", width=10)
        for rank, i in enumerate(order[:limit], 1):
            c = cv.configs[i]
            marker = "[bold green]*[/bold green]" if i == cv.best_index else ""
            table.add_row(
                f"{rank}{marker}",
                f"{cv.mean_auc[i]:.4f}",
                str(c.max_depth),
                f"{c.min_child_weight:g}",
                f"{c.subsample:g}",
                str(c.k_features),
            )
        self.console.print(table)
        if len(order) > limit:
            self.console.print(f"  ... and {len(order) - limit} more configurations")

    def display_selection(self, selection: SelectionReport, limit: int = 15) -> None:
        """Display the top selected columns with their F-scores."""
        table = Table(title=f"Selected Features (top {selection.k} of {len(selection.scores)})")
        table.add_column("#", style="white", width=4)
        table.add_column("Feature", style="white")
        table.add_column("F-score", style="bold yellow", justify="right")
        for i, name in enumerate(selection.chosen[:limit], 1):
            table.add_row(str(i), name, f"{selection.scores[name]:.4g}")
        self.console.print(table)
        if len(selection.chosen) > limit:
            self.console.print(f"  ... and {len(selection.chosen) - limit} more features")

    def display_metrics(self, metrics: MetricsReport) -> None:
        table = Table(title="Metrics", show_header=False, box=None)
        table.add_column("Field", style="bold yellow", width=25)
        table.add_column("Value", style="white")
        table.add_row("AUC", f"{metrics.auc:.4f}")
        table.add_row("F1", f"{metrics.f1:.4f}")
        table.add_row("Cohen's kappa", f"{metrics.kappa:.4f}")
        table.add_row("Patients", str(metrics.n))
        table.add_row("Threshold", f"{metrics.threshold:g}")
        self.console.print(table)

    def display_ablation(self, report: AblationReport) -> None:
        """Display every configuration and time-point subset of an ablation run."""
        self._header(f"Ablation ({report.evaluation})")
        table = Table()
        table.add_column("Configuration", style="white")
        table.add_column("Time points", style="white")
        table.add_column("AUC", style="bold yellow", justify="right")
        table.add_column("F1", justify="right")
        table.add_column("Kappa", justify="right")
        table.add_column("n", justify="right")
        table.add_column(f"p vs {report.reference}", justify="right")
        for r in report.rows:
            p = "" if r.p_value_vs_reference is None else f"{r.p_value_vs_reference:.4f}"
            m = r.metrics
            table.add_row(r.config, r.timepoints_label, f"{m.auc:.4f}", f"{m.f1:.4f}", f"{m.kappa:.4f}", str(m.n), p)
        self.console.print(table)
        if report.excluded_patients:
            self.print_warning(f"Excluded patients: {', '.join(report.excluded_patients)}")

    def display_decay(self, decay: RoiDecay) -> None:
        table = Table(title="ROI Signal Decay", show_header=False, box=None)
        table.add_column("Field", style="bold cyan", width=25)
        table.add_column("Value", style="white")
        for b, s in zip(decay.bvalues, decay.mean_signal):
            table.add_row(f"S(b={b:g})", f"{s:.2f}")
        for name, fit in decay.fits.items():
            table.add_row(name, "n/a" if fit is None else f"{fit.adc:.4e} mm²/s")
        table.add_row("F", "n/a" if decay.f is None else f"{decay.f:.4f}")
        self.console.print(table)

    def print_success(self, message: str) -> None:
        """Print a success message.

        Args:
            message: Success message to display
        """
        self.console.print(f"[bold green]✓[/bold green] {message}")

    def print_info(self, message: str) -> None:
        self.console.print(f"[bold blue]ℹ[/bold blue] {message}")

    def print_warning(self, message: str) -> None:
        """Print a warning message."""
        self.console.print(f"[bold yellow]Warning:[/bold yellow] {message}")
