from eastnet.data.calendar import TemporalCovariates, covariate_width, encode_calendar
from eastnet.data.events import Event, EventScript, event_mask, parse_event
from eastnet.data.io import read_dataset, write_dataset
from eastnet.data.mobility import (
	ChannelStats,
	MobilityTensor,
	SplitRanges,
	Window,
	WindowDataset,
	channel_stats,
	denormalize,
	make_windows,
	normalize,
	split_chrono,
)
from eastnet.data.synthetic import PRESETS, GeneratorConfig, generate_synthetic, preset_config

__all__ = [
	"PRESETS",
	"ChannelStats",
	"Event",
	"EventScript",
	"GeneratorConfig",
	"MobilityTensor",
	"SplitRanges",
	"TemporalCovariates",
	"Window",
	"WindowDataset",
	"channel_stats",
	"covariate_width",
	"denormalize",
	"encode_calendar",
	"event_mask",
	"generate_synthetic",
	"make_windows",
	"normalize",
	"parse_event",
	"preset_config",
	"read_dataset",
	"split_chrono",
	"write_dataset",
]
