from mascan.plots import save_figure, sweep_figure, trace_figure

ROWS = [
    {"value": 5.0, "scheme": "proposed", "mean_objective": 0.05},
    {"value": 10.0, "scheme": "proposed", "mean_objective": 0.16},
    {"value": 5.0, "scheme": "fixed", "mean_objective": 0.06},
    {"value": 10.0, "scheme": "fixed", "mean_objective": None},
]


def test_sweep_figure_renders_one_line_per_scheme(tmp_path):
    fig = sweep_figure(ROWS, axis_label="floor (dB)")
    assert len(fig.axes) == 1
    assert len(fig.axes[0].lines) == 2
    out = save_figure(fig, tmp_path / "deep" / "sweep.png")
    assert out.exists() and out.stat().st_size > 1000


def test_sweep_figure_log_scale_option():
    import matplotlib.pyplot as plt

    fig = sweep_figure(ROWS, axis_label="x", logy=True)
    assert fig.axes[0].get_yscale() == "log"
    plt.close(fig)


def test_trace_figure_plots_every_round(tmp_path):
    trace = (0.3, 0.2, 0.18, 0.1799)
    fig = trace_figure(trace, title="one instance")
    line = fig.axes[0].lines[0]
    assert list(line.get_ydata()) == list(trace)
    out = save_figure(fig, tmp_path / "trace.png")
    assert out.exists() and out.stat().st_size > 1000
