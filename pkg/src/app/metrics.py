from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest

# Dedicated registry: a CLI run dumps exactly these series and nothing from
# the default process collectors.
registry = CollectorRegistry()

shell_evaluations_total = Counter(
    "ifock_shell_evaluations_total",
    "Energy shells solved",
    ["dispersion"],
    registry=registry,
)

degenerate_shells_total = Counter(
    "ifock_degenerate_shells_total",
    "Energy shells rejected as tangent",
    registry=registry,
)

quadrature_calls_total = Counter(
    "ifock_quadrature_calls_total",
    "Adaptive quadrature invocations",
    ["routine"],
    registry=registry,
)

quadrature_failures_total = Counter(
    "ifock_quadrature_failures_total",
    "Adaptive quadrature runs that reported non-convergence",
    ["routine"],
    registry=registry,
)

moment_evaluations_total = Counter(
    "ifock_moment_evaluations_total",
    "Correlator evaluations per computational route",
    ["route"],
    registry=registry,
)

command_duration_seconds = Histogram(
    "ifock_command_duration_seconds",
    "Wall time of CLI commands in seconds",
    ["command"],
    registry=registry,
)


def metrics_snapshot() -> bytes:
    return generate_latest(registry)


def write_metrics(path: str) -> None:
    with open(path, "wb") as handle:
        handle.write(metrics_snapshot())
