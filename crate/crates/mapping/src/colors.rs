use vibwalk_core::Material;

/// Fixed label colours, indexed by taxonomy position. Changing an entry
/// changes every render, so treat this table as versioned.
pub const PALETTE_VERSION: u32 = 1;

const PALETTE: [&str; 18] = [
    "#8c564b", // carpet
    "#d62728", // red_carpet
    "#e377c2", // chromatic_carpet
    "#9467bd", // mat
    "#f2d16b", // sand
    "#bcbd22", // gravel_small
    "#7f7f7f", // gravel_mid
    "#4d4d4d", // gravel_large
    "#17becf", // tile
    "#ff7f0e", // plastic
    "#a0522d", // wood
    "#1f1f7a", // rubber
    "#6b4226", // soil
    "#2b2b2b", // asphalt
    "#c49c94", // slab
    "#aec7e8", // concrete
    "#98df8a", // stone
    "#2ca02c", // grass
];

pub fn label_color(m: Material) -> &'static str {
    PALETTE[m.index()]
}
