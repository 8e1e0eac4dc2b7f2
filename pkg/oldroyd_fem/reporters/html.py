"""
HTML run report
"""

from pathlib import Path
from typing import Union

from jinja2 import Template

from oldroyd_fem.models import RunSummary
from oldroyd_fem.reporters import BaseReporter

HTML_TEMPLATE = """
<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <meta name="viewport" content="width=device-width, initial-scale=1.0">
    <title>Oldroyd-B Energy Audit: {{ cert.scheme }}</title>
    <style>
        * {
            margin: 0;
            padding: 0;
            box-sizing: border-box;
        }

        body {
            font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Roboto, Oxygen, Ubuntu, Cantarell, sans-serif;
            line-height: 1.6;
            color: #333;
            background: #f5f5f5;
            padding: 20px;
        }

        .container {
            max-width: 1200px;
            margin: 0 auto;
            background: white;
            padding: 30px;
            border-radius: 8px;
            box-shadow: 0 2px 8px rgba(0,0,0,0.1);
        }

        h1 {
            color: #2c3e50;
            margin-bottom: 20px;
            padding-bottom: 10px;
            border-bottom: 3px solid #3498db;
        }

        h2 {
            color: #34495e;
            margin-top: 30px;
            margin-bottom: 15px;
            padding-bottom: 8px;
            border-bottom: 2px solid #ecf0f1;
        }

        .summary {
            display: grid;
            grid-template-columns: repeat(auto-fit, minmax(200px, 1fr));
            gap: 15px;
            margin: 20px 0;
        }

        .summary-item {
            background: #ecf0f1;
            padding: 15px;
            border-radius: 5px;
            text-align: center;
        }

        .summary-item .label {
            font-size: 0.9em;
            color: #7f8c8d;
            margin-bottom: 5px;
        }

        .summary-item .value {
            font-size: 1.4em;
            font-weight: bold;
            color: #2c3e50;
        }

        table {
            width: 100%;
            border-collapse: collapse;
            margin: 15px 0;
            background: white;
            font-size: 0.9em;
        }

        th, td {
            padding: 8px;
            text-align: right;
            border-bottom: 1px solid #ecf0f1;
        }

        th {
            background: #34495e;
            color: white;
            font-weight: 600;
        }

        tr:hover {
            background: #f8f9fa;
        }

        .pass {
            color: #27ae60;
            font-weight: bold;
        }

        .fail {
            color: #e74c3c;
            font-weight: bold;
        }

        .incomplete {
            color: #f39c12;
            font-weight: bold;
        }

        code {
            background: #f8f9fa;
            padding: 2px 6px;
            border-radius: 3px;
            font-family: 'Courier New', monospace;
            font-size: 0.9em;
        }
    </style>
</head>
<body>
    <div class="container">
        <h1>Energy Audit: {{ cert.scheme }}</h1>

        <div class="summary">
            <div class="summary-item">
                <div class="label">Verdict</div>
                <div class="value {{ cert.verdict }}">{{ cert.verdict }}</div>
            </div>
            <div class="summary-item">
                <div class="label">Steps Converged</div>
                <div class="value">{{ cert.converged_steps }} / {{ cert.total_steps }}</div>
            </div>
            <div class="summary-item">
                <div class="label">Min Slack</div>
                <div class="value">{{ "%.3e"|format(cert.min_slack) }}</div>
            </div>
            <div class="summary-item">
                <div class="label">Cumulative Residual</div>
                <div class="value">{{ "%.3e"|format(cert.cumulative_residual) }}</div>
            </div>
        </div>

        <p>Audit tolerance <code>{{ cert.audit_tol }}</code>, configuration <code>{{ cert.config_hash[:16] }}</code></p>
        {% if summary.failure %}
        <p class="fail">Run stopped: {{ summary.failure }}</p>
        {% endif %}
        {% if cert.failed_steps %}
        <p class="fail">Failing steps: {{ cert.failed_steps|join(", ") }}</p>
        {% endif %}

        <h2>Energy Ledger</h2>
        {% if summary.breakdowns %}
        <table>
            <thead>
                <tr>
                    <th>n</th>
                    <th>t</th>
                    <th>F</th>
                    <th>kinetic</th>
                    <th>entropy</th>
                    <th>viscous</th>
                    <th>stress</th>
                    <th>diffusion</th>
                    <th>forcing</th>
                    <th>slack</th>
                    <th>iters</th>
                    <th>min eig</th>
                </tr>
            </thead>
            <tbody>
                {% for b in summary.breakdowns %}
                <tr>
                    <td>{{ b.step }}</td>
                    <td>{{ "%.4g"|format(b.time) }}</td>
                    <td>{{ "%.10g"|format(b.total) }}</td>
                    <td>{{ "%.6g"|format(b.kinetic) }}</td>
                    <td>{{ "%.6g"|format(b.entropy) }}</td>
                    <td>{{ "%.3e"|format(b.visc_dissipation) }}</td>
                    <td>{{ "%.3e"|format(b.stress_dissipation) }}</td>
                    <td>{{ "%.3e"|format(b.diffusion_dissipation) }}</td>
                    <td>{{ "%.3e"|format(b.forcing_pairing) }}</td>
                    <td class="{% if b.passes(cert.audit_tol) %}pass{% else %}fail{% endif %}">{{ "%.3e"|format(b.slack) }}</td>
                    <td>{{ b.iterations }}</td>
                    <td>{{ "%.6g"|format(b.min_eig_stress) }}</td>
                </tr>
                {% endfor %}
            </tbody>
        </table>
        {% else %}
        <p>No step converged.</p>
        {% endif %}

        {% if summary.mesh_audit %}
        <h2>Mesh</h2>
        <p>h = {{ "%.4g"|format(summary.mesh_audit.h) }},
           max angle {{ "%.2f"|format(summary.mesh_audit.max_angle * 57.29577951308232) }}&deg;,
           non-obtuse: <strong>{{ summary.mesh_audit.non_obtuse }}</strong>,
           shape ratio {{ "%.3g"|format(summary.mesh_audit.max_shape_ratio) }}</p>
        {% endif %}

        {% if summary.continuation %}
        <h2>Delta Continuation</h2>
        <table>
            <thead>
                <tr><th>delta</th><th>F</th><th>negative part</th><th>min eig</th></tr>
            </thead>
            <tbody>
                {% for d in summary.continuation.deltas %}
                <tr>
                    <td>{{ d }}</td>
                    <td>{{ "%.10g"|format(summary.continuation.final_energies[loop.index0]) }}</td>
                    <td>{{ "%.3e"|format(summary.continuation.negative_parts[loop.index0]) }}</td>
                    <td>{{ "%.6g"|format(summary.continuation.min_eigenvalues[loop.index0]) }}</td>
                </tr>
                {% endfor %}
            </tbody>
        </table>
        <p>Unregularized residual of the last state: <code>{{ summary.continuation.unregularized_residual }}</code></p>
        {% endif %}
    </div>
</body>
</html>
"""


class HTMLReporter(BaseReporter):
    """Generates an HTML run report"""

    def generate(self, result: RunSummary, output_path: Union[str, Path]) -> None:
        """
        Generate an HTML report

        Args:
            result: Run summary
            output_path: Path to write HTML file
        """
        template = Template(HTML_TEMPLATE)
        html_content = template.render(summary=result, cert=result.certificate)

        self.ensure_directory(output_path)

        with open(output_path, "w", encoding="utf-8") as f:
            f.write(html_content)
