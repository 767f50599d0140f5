"""Route-design engine for longitudinal street-view reconnaissance.

The package turns a road network, a community-asset inventory, and
census income geography into drivable survey routes: drive-time
optimized transects through capital assets, exhaustive intersection
canvasses of high-diversity areas, turn-aware editing of both, and the
survey calendar that keeps a campaign on cadence.
"""

from __future__ import annotations

from .campaign import (
    EQUIPMENT_UNAVAILABLE,
    EVENT,
    RAIN,
    RESCHEDULED,
    SCHEDULED,
    CampaignPolicy,
    SurveyCalendar,
    SurveyEntry,
    generate_calendar,
    insert_event_survey,
    reschedule,
)
from .canvass import CanvassProblem, intersections_in_area, solve_canvass
from .config import DEFAULT_BUFFER_M, INFINITE, PROHIBITED, SolverConfig
from .editing import (
    EditCommand,
    EditContext,
    EditOutcome,
    EditState,
    SpurReport,
    apply_edits,
    fold_commands,
    parse_edit_command,
    prune_spurs,
    restricted_graph,
    splice,
)
from .errors import (
    ConfigError,
    ConstraintError,
    DomainError,
    EmptyAreaError,
    EngineError,
    GeometryError,
    InfeasibleError,
    NoPathError,
    NotFoundError,
    ParseError,
    RangeError,
    SerializationError,
    SyncError,
    UnreachableError,
    ValidationError,
)
from .graph import (
    Arc,
    PathResult,
    RoutableGraph,
    TurnModel,
    build_graph,
    one_to_many,
    pairwise_matrix,
    shortest_path,
)
from .income import (
    CanvasArea,
    JenksResult,
    classify_block_groups,
    jenks_breaks,
    rank_candidate_areas,
    score_canvas_area,
)
from .ingest import (
    CAPITAL_CLASSES,
    Asset,
    BlockGroup,
    Edge,
    GeoPoint,
    Node,
    RoadClass,
    RoadNetwork,
    load_assets,
    load_block_groups,
    load_road_network,
    network_to_geojson,
    project,
    unproject,
)
from .reporting import (
    ArrivalStamp,
    CoverageReport,
    export_geojson,
    export_gpx,
    export_route,
    report,
)
from .routes import (
    Maneuver,
    Route,
    Waypoint,
    WaypointKind,
    detect_three_point_turns,
    nearest_node,
    route_from_dict,
    route_to_dict,
)
from .spatial import (
    AssetAssociation,
    associate_assets,
    point_to_polyline_distance,
    route_coverage,
)
from .transect import (
    TransectProblem,
    TransectSolution,
    build_transect_problem,
    select_seed_classes,
    solve_transect,
)

__all__ = [
    "Arc",
    "ArrivalStamp",
    "Asset",
    "AssetAssociation",
    "BlockGroup",
    "CAPITAL_CLASSES",
    "CampaignPolicy",
    "CanvasArea",
    "CanvassProblem",
    "ConfigError",
    "ConstraintError",
    "CoverageReport",
    "DEFAULT_BUFFER_M",
    "DomainError",
    "EQUIPMENT_UNAVAILABLE",
    "EVENT",
    "Edge",
    "EditCommand",
    "EditContext",
    "EditOutcome",
    "EditState",
    "EmptyAreaError",
    "EngineError",
    "GeoPoint",
    "GeometryError",
    "INFINITE",
    "InfeasibleError",
    "JenksResult",
    "Maneuver",
    "NoPathError",
    "Node",
    "NotFoundError",
    "PROHIBITED",
    "ParseError",
    "PathResult",
    "RAIN",
    "RESCHEDULED",
    "RangeError",
    "RoadClass",
    "RoadNetwork",
    "RoutableGraph",
    "Route",
    "SCHEDULED",
    "SerializationError",
    "SolverConfig",
    "SpurReport",
    "SurveyCalendar",
    "SurveyEntry",
    "SyncError",
    "TransectProblem",
    "TransectSolution",
    "TurnModel",
    "UnreachableError",
    "ValidationError",
    "Waypoint",
    "WaypointKind",
    "apply_edits",
    "associate_assets",
    "build_graph",
    "build_transect_problem",
    "classify_block_groups",
    "detect_three_point_turns",
    "export_geojson",
    "export_gpx",
    "export_route",
    "fold_commands",
    "generate_calendar",
    "insert_event_survey",
    "intersections_in_area",
    "jenks_breaks",
    "load_assets",
    "load_block_groups",
    "load_road_network",
    "nearest_node",
    "network_to_geojson",
    "one_to_many",
    "pairwise_matrix",
    "parse_edit_command",
    "point_to_polyline_distance",
    "project",
    "prune_spurs",
    "rank_candidate_areas",
    "report",
    "reschedule",
    "restricted_graph",
    "route_coverage",
    "route_from_dict",
    "route_to_dict",
    "score_canvas_area",
    "select_seed_classes",
    "shortest_path",
    "solve_canvass",
    "solve_transect",
    "splice",
    "unproject",
]
