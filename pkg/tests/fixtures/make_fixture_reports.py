"""Regenerate the synthetic fixture corpus (60 weekly slices, 3 metrics).

Run from the repository root:  python3 tests/fixtures/make_fixture_reports.py
The outputs are committed; this script only exists to document how they
were produced and to keep them reproducible.
"""

import datetime as dt
import math
from pathlib import Path

HERE = Path(__file__).parent
START = dt.date(2021, 1, 4)  # a Monday, so weekly slices align exactly
WEEKS = 60


def main():
    weeks = [START + dt.timedelta(weeks=i) for i in range(WEEKS)]

    # Report A: plain text. Weekly glucose, an HbA1c reading every 4th week.
    lines = [
        "Patient: P-001",
        "Source: outpatient metabolic clinic, weekly panel",
        "",
    ]
    for i, day in enumerate(weeks):
        lines.append(day.isoformat())
        glucose = round(104 + 18 * math.sin(2 * math.pi * i / 26) + (i % 5), 1)
        lines.append(f"Glucose: {glucose} mg/dL")
        if i % 4 == 0:
            hba1c = round(5.6 + 0.5 * math.sin(2 * math.pi * i / 52), 2)
            lines.append(f"HbA1c: {hba1c} %")
        lines.append("")
    (HERE / "reports" / "report_a.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # Report B: CSV with alias metric names. Weekly HbA1c and creatinine.
    rows = ["date,metric,value,unit"]
    for i, day in enumerate(weeks):
        hba1c = round(5.7 + 0.5 * math.sin(2 * math.pi * (i + 3) / 52), 2)
        creat = round(0.9 + 0.2 * math.cos(2 * math.pi * i / 30), 2)
        rows.append(f"{day.isoformat()},a1c,{hba1c},%")
        rows.append(f"{day.isoformat()},creat,{creat},mg/dL")
    (HERE / "reports" / "report_b.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote fixture reports for {WEEKS} weeks starting {START}")


if __name__ == "__main__":
    main()
