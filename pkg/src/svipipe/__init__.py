"""Street-view imagery pipeline: frames and GPS in, geocoded pedestrian detections and mobility regressions out."""
from .aggregate import SurveyObservation, aggregate_survey, build_series, count_subset_k
from .config import PipelineConfig, load_config
from .detect import Detection, filter_by_confidence, ingest_detections, stub_detect
from .geotrack import GeoPoint, GpsTrack, haversine_distance, interpolate_position, subsample_frames
from .georef import RegionIndex, geocode_detections, load_regions, match_geoid, point_in_region
from .orthorect import DEFAULT_VIEWS, Side, ViewSpec, gnomonic_ray, orthorectify
from .pipeline import export_figure_data, run_analysis, run_survey

__version__ = "0.1.0"
