"""
Evaluation Report Generation Module

Write a run directory (JSON report, timing telemetry, metrics CSV, HTML
summary) and compare two runs with per-query paired t-tests.
"""

import csv
import json
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from jinja2 import Environment

from ..errors import EvaluationError
from .harness import METRIC_NAMES, RunReport
from .stats import TTestResult, paired_ttest

REPORT_FILE = "report.json"
TELEMETRY_FILE = "telemetry.json"
METRICS_FILE = "metrics.csv"
HTML_FILE = "report.html"


HTML_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
    <title>Recommendation Run Report</title>
    <style>
        body {
            font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Roboto, sans-serif;
            max-width: 1200px;
            margin: 0 auto;
            padding: 20px;
            background: #f5f5f5;
        }
        .header {
            background: linear-gradient(135deg, #2b7a78 0%, #17252a 100%);
            color: white;
            padding: 30px;
            border-radius: 10px;
            margin-bottom: 20px;
        }
        .section {
            background: white;
            padding: 20px;
            border-radius: 10px;
            margin-bottom: 20px;
            box-shadow: 0 2px 4px rgba(0,0,0,0.1);
        }
        .section h2 { color: #333; border-bottom: 2px solid #2b7a78; padding-bottom: 10px; }
        .metrics-grid {
            display: grid;
            grid-template-columns: repeat(auto-fit, minmax(200px, 1fr));
            gap: 15px;
        }
        .metric-card { background: #f8f9fa; padding: 15px; border-radius: 8px; text-align: center; }
        .metric-value { font-size: 24px; font-weight: bold; color: #2b7a78; }
        .metric-label { color: #666; font-size: 14px; }
        .status-good { color: #28a745; }
        .status-bad { color: #dc3545; }
        table { width: 100%; border-collapse: collapse; }
        th, td { padding: 8px; text-align: left; border-bottom: 1px solid #ddd; }
        th { background: #f8f9fa; }
        .footer { text-align: center; color: #666; padding: 20px; }
    </style>
</head>
<body>
    <div class="header">
        <h1>Recommendation Run Report</h1>
        <p>Strategy: {{ config.strategy }}
           {%- if config.ablations %} &middot; w/o {{ config.ablations | join(", ") }}{% endif %}
           {%- if config.novel_tags %} &middot; novel: {{ config.novel_tags | join(", ") }}{% endif %}</p>
        <p>Generated: {{ timestamp }}</p>
    </div>

    <div class="section">
        <h2>Summary Metrics</h2>
        <div class="metrics-grid">
        {%- for name in metric_names %}
            <div class="metric-card">
                <div class="metric-value">{{ "%.4f" | format(overall[name]) }}</div>
                <div class="metric-label">{{ name }}</div>
            </div>
        {%- endfor %}
            <div class="metric-card">
                <div class="metric-value">{{ overall.n }}</div>
                <div class="metric-label">Queries</div>
            </div>
        </div>
    </div>

    <div class="section">
        <h2>By Difficulty</h2>
        <table>
            <tr><th>Difficulty</th>{% for name in metric_names %}<th>{{ name }}</th>{% endfor %}<th>n</th></tr>
            {%- for difficulty, row in per_difficulty.items() %}
            <tr><td>{{ difficulty }}</td>{% for name in metric_names %}<td>{{ "%.4f" | format(row[name]) }}</td>{% endfor %}<td>{{ row.n }}</td></tr>
            {%- endfor %}
        </table>
    </div>

    <div class="section">
        <h2>Token Usage</h2>
        <table>
            <tr><th>Call tag</th><th>Calls</th><th>Prompt tokens</th><th>Completion tokens</th></tr>
            {%- for tag, counters in ledger.per_tag.items() if counters.calls %}
            <tr><td>{{ tag }}</td><td>{{ counters.calls }}</td><td>{{ counters.prompt_tokens }}</td><td>{{ counters.completion_tokens }}</td></tr>
            {%- endfor %}
        </table>
    </div>

    <div class="section">
        <h2>Queries</h2>
        <table>
            <tr><th>Query</th><th>Scenario</th><th>Outcome</th><th>HR@10</th><th>NDCG@10</th><th>Prompt</th></tr>
            {%- for o in outcomes %}
            <tr>
                <td>{{ o.query_id }}</td><td>{{ o.scenario }}</td>
                <td class="{{ 'status-good' if o.success else 'status-bad' }}">
                    {{- "success" if o.success else (o.failure_reason or "rejected") }}</td>
                <td>{{ "%.2f" | format(o["HR@10"]) }}</td><td>{{ "%.2f" | format(o["NDCG@10"]) }}</td>
                <td>{{ o.prompt_mode }}</td>
            </tr>
            {%- endfor %}
        </table>
    </div>

    <div class="footer">
        <p>Generated by thoughtrec</p>
    </div>
</body>
</html>
"""

_env = Environment(autoescape=True)


def generate_html_report(report: RunReport, output_path: str) -> str:
    """
    Render the HTML summary of a run.

    Parameters
    ----------
    report : RunReport
        Evaluated run
    output_path : str
        Output HTML file path

    Returns
    -------
    str
        Path to generated report
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    html = _env.from_string(HTML_TEMPLATE).render(
        timestamp=datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        metric_names=METRIC_NAMES,
        **data,
    )
    with open(output_path, "w") as f:
        f.write(html)
    return str(output_path)


def write_metrics_csv(report: RunReport, output_path: str) -> str:
    """Metrics table with one row per difficulty plus an ``all`` row."""
    rows = [("all", report.overall)] + list(report.per_difficulty.items())
    with open(output_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["strategy", "difficulty", *METRIC_NAMES, "n"])
        for difficulty, metrics in rows:
            writer.writerow([report.strategy, difficulty,
                             *(f"{metrics[name]:.4f}" for name in METRIC_NAMES), metrics["n"]])
    return str(output_path)


def write_run(report: RunReport, out_dir: str) -> Dict[str, str]:
    """
    Persist a run directory.

    ``report.json`` carries no timing, so scripted runs are byte-identical;
    latencies go to ``telemetry.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / REPORT_FILE, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    with open(out_dir / TELEMETRY_FILE, "w") as f:
        json.dump({
            "latency_seconds": {o.query_id: round(o.latency, 6) for o in report.outcomes},
            "total_latency_seconds": round(sum(o.latency for o in report.outcomes), 6),
        }, f, indent=2)

    return {
        "report": str(out_dir / REPORT_FILE),
        "telemetry": str(out_dir / TELEMETRY_FILE),
        "metrics": write_metrics_csv(report, str(out_dir / METRICS_FILE)),
        "html": generate_html_report(report, str(out_dir / HTML_FILE)),
    }


def load_run(run_dir: str) -> RunReport:
    path = Path(run_dir) / REPORT_FILE
    if not path.exists():
        raise FileNotFoundError(f"Run report not found: {path}")
    with open(path) as f:
        return RunReport.from_dict(json.load(f))


def compare_runs(a: RunReport, b: RunReport,
                 metrics: Optional[List[str]] = None) -> Dict[str, TTestResult]:
    """
    Paired t-test of run ``a`` against run ``b`` on the queries they share.

    Raises
    ------
    EvaluationError
        When fewer than two query ids are shared
    """
    shared = sorted({o.query_id for o in a.outcomes} & {o.query_id for o in b.outcomes})
    if len(shared) < 2:
        raise EvaluationError(f"runs share {len(shared)} query id(s); need at least 2")
    results = {}
    for name in metrics or METRIC_NAMES:
        xs = [a.outcome(q).metric(name) for q in shared]
        ys = [b.outcome(q).metric(name) for q in shared]
        results[name] = paired_ttest(xs, ys)
    return results


def format_comparison(a: RunReport, b: RunReport, results: Dict[str, TTestResult]) -> str:
    """Text table; ``*`` marks p < 0.05."""
    lines = [f"{'metric':<10}{a.strategy:>14}{b.strategy:>14}{'t':>10}{'p':>10}"]
    overall_a, overall_b = a.overall, b.overall
    for name, res in results.items():
        mark = "*" if res.significant else ""
        lines.append(
            f"{name:<10}{overall_a[name]:>14.4f}{overall_b[name]:>14.4f}"
            f"{res.t:>10.3f}{res.p:>10.4f}{mark}"
        )
    return "\n".join(lines)
