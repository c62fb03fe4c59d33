from .component import (
    PORT,
    WALL,
    ComponentGeometry,
    GeometryError,
    Segment,
    build_component,
    polygon_component,
    rectangle,
)
from .panels import (
    Discretization,
    PanelOptions,
    default_image_radius,
    corner_kind,
    grading_levels,
    vertex_levels,
    image_curves,
    panelize,
    port_panel_count,
    reflect_points,
    reflect_vectors,
)
from .graph import (
    CircuitGraph,
    chain_graph,
    two_component_template,
    ExternalPort,
    Interface,
    check_interfaces,
    component_mode_counts,
    external_mode_count,
    interface_mode_count,
    lattice_generator,
    single_component_graph,
    union_component,
    with_mode_counts,
)
