import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parent.parent / "demos"


@pytest.mark.parametrize("script,args", [("transport_basics.py", []), ("bgp_triangle.py", ["300"]),
                                         ("ospf_over_streams.py", [])])
def test_demo_runs(script, args):
    out = subprocess.run([sys.executable, str(DEMOS / script), *args], capture_output=True,
                         text=True, timeout=300)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip()
