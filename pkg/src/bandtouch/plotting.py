"""gnuplot script generation for the CSV tables written by the CLI."""

from __future__ import annotations

_HEADER = """\
set datafile separator ","
set key autotitle columnhead
set grid
set terminal pngcairo size 900,600
set output "{image}"
"""

_AXIS_LABELS = {
    "delta": "{/Symbol D}",
    "speed": "c",
    "exponent": "n",
}


def _quote(path) -> str:
    return str(path).replace("\\", "\\\\").replace('"', '\\"')


def _head(image, title) -> str:
    return _HEADER.format(image=_quote(image)) + f'set title "{_quote(title)}"\n'


def fis_script(data, image, title: str = "fidelity susceptibility") -> str:
    """chi against lambda."""
    return (
        _head(image, title)
        + 'set xlabel "{/Symbol l}"\n'
        + 'set ylabel "{/Symbol c}"\n'
        + f'plot "{_quote(data)}" using 1:2 with lines lw 2 title "{{/Symbol c}}({{/Symbol l}})"\n'
    )


def evolve_script(data, image, title: str = "populations") -> str:
    """Instantaneous ground and excited populations against lambda."""
    return (
        _head(image, title)
        + 'set xlabel "{/Symbol l}"\n'
        + 'set ylabel "population"\n'
        + "set yrange [0:1]\n"
        + f'plot "{_quote(data)}" using 2:7 with lines lw 2 title "ground", \\\n'
        + '     "" using 2:8 with lines lw 2 title "excited"\n'
    )


def sweep_script(data, image, axis: str, with_phase: bool, title: str = "transition probability") -> str:
    """P against the sweep axis; with ``with_phase``, |delta_phi|/2pi on a second y axis."""
    label = _AXIS_LABELS.get(axis, axis)
    text = _head(image, title) + f'set xlabel "{label}"\n' + 'set ylabel "P"\n'
    if not with_phase:
        return text + f'plot "{_quote(data)}" using 1:2 with linespoints lw 2 title "P"\n'
    return (
        text
        + 'set y2label "|{/Symbol DF}|/2{/Symbol p}"\n'
        + "set ytics nomirror\n"
        + "set y2tics\n"
        + "set y2range [0:0.5]\n"
        + f'plot "{_quote(data)}" using 1:2 axes x1y1 with linespoints lw 2 title "P", \\\n'
        + '     "" using 1:(abs($3)/(2*pi)) axes x1y2 with linespoints lw 2 '
        + 'title "|{/Symbol DF}|/2{/Symbol p}"\n'
    )
