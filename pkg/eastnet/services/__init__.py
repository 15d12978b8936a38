"""Service layer shared by the CLI commands: training, evaluation, baselines and reporting."""

__all__ = [
	"baselines",
	"experiments",
	"metrics",
	"reporting",
	"training",
]
