//! Synthetic instance generation: gridded mines with a smooth grade field
//! plus per-scenario noise, the 9-block overlying precedence pattern, and a
//! small processing network templated on realistic parameter ranges.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kmeans::{cluster_blocks, ClusterInput};
use super::{
    AttrForm, Block, BlockId, Discounts, HereditaryAttr, LocationId, LocationKind, LocationNode,
    MiningComplexInstance, ModelError, Recovery, ScenarioSet,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GradeFieldConfig {
    /// Mean grade (mass fraction of metal).
    pub base_mean: f64,
    /// Peak deviation of the smooth field from the mean.
    pub base_amplitude: f64,
    /// Spatial frequency of the field in cycles across the grid.
    pub frequency: f64,
    /// Standard deviation of the per-scenario Gaussian noise.
    pub noise_std: f64,
}

impl Default for GradeFieldConfig {
    fn default() -> Self {
        Self { base_mean: 0.002, base_amplitude: 0.0015, frequency: 1.5, noise_std: 0.0005 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicsConfig {
    pub metal_price: f64,
    pub mining_cost: f64,
    pub processing_cost: f64,
    pub waste_cost: f64,
    /// Metal recovery fraction at processors.
    pub recovery: f64,
    pub cash_discount: f64,
    pub risk_discount: f64,
}

impl Default for EconomicsConfig {
    fn default() -> Self {
        Self {
            metal_price: 3000.0,
            mining_cost: 1.0,
            processing_cost: 4.0,
            waste_cost: 0.25,
            recovery: 0.85,
            cash_discount: 0.1,
            risk_discount: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityConfig {
    /// Mining bound as a multiple of (mine tonnage / horizon).
    pub mining_factor: f64,
    /// Upper processing bound as a multiple of (total tonnage / horizon),
    /// shared equally across processors.
    pub processing_upper_factor: f64,
    pub processing_lower_factor: f64,
    /// Stockpile capacity as a multiple of (total tonnage / horizon).
    pub stockpile_factor: f64,
    pub mining_surplus_penalty: f64,
    pub processing_shortage_penalty: f64,
    pub processing_surplus_penalty: f64,
    pub stockpile_surplus_penalty: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            mining_factor: 1.3,
            processing_upper_factor: 0.5,
            processing_lower_factor: 0.15,
            stockpile_factor: 0.3,
            mining_surplus_penalty: 1.0,
            processing_shortage_penalty: 8.0,
            processing_surplus_penalty: 5.0,
            stockpile_surplus_penalty: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub name: String,
    pub num_mines: usize,
    /// Blocks per mine along each axis `(nx, ny, nz)`; `nz` counts benches.
    pub grid: [usize; 3],
    pub block_tonnage: f64,
    pub num_processors: usize,
    pub num_stockpiles: usize,
    pub num_scenarios: usize,
    pub horizon: usize,
    pub num_metals: usize,
    pub grade: GradeFieldConfig,
    pub clusters_per_mine: usize,
    pub kmeans_max_iter: usize,
    pub economics: EconomicsConfig,
    pub capacities: CapacityConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            num_mines: 1,
            grid: [10, 10, 5],
            block_tonnage: 10_800.0,
            num_processors: 1,
            num_stockpiles: 0,
            num_scenarios: 10,
            horizon: 8,
            num_metals: 1,
            grade: GradeFieldConfig::default(),
            clusters_per_mine: 8,
            kmeans_max_iter: 50,
            economics: EconomicsConfig::default(),
            capacities: CapacityConfig::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn blocks_per_mine(&self) -> usize {
        self.grid[0] * self.grid[1] * self.grid[2]
    }

    /// The smooth deterministic component of the grade field. Depends only on
    /// the configuration, never on the seed, so tests can recompute it.
    pub fn base_grade(&self, mine: usize, metal: usize, pos: [i64; 3]) -> f64 {
        let [nx, ny, nz] = self.grid;
        let x = (pos[0] as f64 + 0.5) / nx as f64;
        let y = (pos[1] as f64 + 0.5) / ny as f64;
        let z = (pos[2] as f64 + 0.5) / nz as f64;
        let f = self.grade.frequency * std::f64::consts::TAU;
        let m = mine as f64;
        let mm = metal as f64;
        let field = (f * x + 0.9 + 0.7 * m + 2.1 * mm).sin() * (f * y - 0.4 + 0.3 * m).cos()
            + 0.5 * (f * (x + y + 0.5 * z) + 1.7).sin();
        (self.grade.base_mean + self.grade.base_amplitude * field / 1.5).max(0.0)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.num_mines == 0 || self.blocks_per_mine() == 0 {
            return Err(ModelError::InvalidConfig("instance would have zero blocks".into()));
        }
        if self.horizon == 0 {
            return Err(ModelError::InvalidConfig("horizon is zero".into()));
        }
        if self.num_scenarios == 0 {
            return Err(ModelError::InvalidConfig("scenario count is zero".into()));
        }
        if self.num_metals == 0 {
            return Err(ModelError::InvalidConfig("at least one metal attribute required".into()));
        }
        if self.clusters_per_mine == 0 {
            return Err(ModelError::InvalidConfig("clusters_per_mine is zero".into()));
        }
        Ok(())
    }
}

/// Builds a complete, validated instance from `(config, seed)`; the same pair
/// always yields a bit-identical instance.
pub fn generate_synthetic_instance(
    config: &GeneratorConfig,
    seed: u64,
) -> Result<MiningComplexInstance, ModelError> {
    config.validate()?;
    let [nx, ny, nz] = config.grid;
    let bpm = config.blocks_per_mine();
    let nb = bpm * config.num_mines;
    let ns = config.num_scenarios;
    let t = config.horizon;
    let num_primary = 1 + config.num_metals;

    // Locations: mines, processors, stockpiles, one waste dump.
    let mut locations = Vec::new();
    let mut push = |name: String, kind: LocationKind| -> LocationId {
        let id = locations.len() as LocationId;
        locations.push(LocationNode {
            id,
            name,
            kind,
            recovery: Recovery::Constant(1.0),
            attrs: Vec::new(),
            outgoing: Vec::new(),
            incoming: Vec::new(),
            incoming_groups: Vec::new(),
        });
        id
    };
    let mines: Vec<LocationId> =
        (0..config.num_mines).map(|m| push(format!("mine_{m}"), LocationKind::Mine)).collect();
    let processors: Vec<LocationId> = (0..config.num_processors)
        .map(|p| push(format!("processor_{p}"), LocationKind::Processor))
        .collect();
    let stockpiles: Vec<LocationId> = (0..config.num_stockpiles)
        .map(|s| push(format!("stockpile_{s}"), LocationKind::Stockpile))
        .collect();
    let waste = push("waste".into(), LocationKind::WasteDump);

    // Blocks with the 9-block overlying precedence pattern.
    let mut blocks = Vec::with_capacity(nb);
    for (mi, &mine) in mines.iter().enumerate() {
        let base = (mi * bpm) as BlockId;
        let idx = |i: usize, j: usize, k: usize| base + (k * ny * nx + j * nx + i) as BlockId;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let mut preds = Vec::new();
                    if k > 0 {
                        for dj in -1i64..=1 {
                            for di in -1i64..=1 {
                                let (pi, pj) = (i as i64 + di, j as i64 + dj);
                                if pi >= 0 && pj >= 0 && (pi as usize) < nx && (pj as usize) < ny {
                                    preds.push(idx(pi as usize, pj as usize, k - 1));
                                }
                            }
                        }
                    }
                    blocks.push(Block {
                        id: idx(i, j, k),
                        mine,
                        pos: [i as i64, j as i64, k as i64],
                        tonnage: config.block_tonnage,
                        preds,
                    });
                }
            }
        }
    }

    // Grades: smooth base plus seeded zero-mean noise, truncated at zero.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, config.grade.noise_std)
        .map_err(|e| ModelError::InvalidConfig(format!("noise_std: {e}")))?;
    let mut grades = vec![0.0f64; config.num_metals * nb * ns];
    for metal in 0..config.num_metals {
        for b in 0..nb {
            let block = &blocks[b];
            let mi = mines.iter().position(|&m| m == block.mine).unwrap();
            let base = config.base_grade(mi, metal, block.pos);
            for s in 0..ns {
                grades[(metal * nb + b) * ns + s] = (base + normal.sample(&mut rng)).max(0.0);
            }
        }
    }
    let mut beta = vec![0.0f64; num_primary * nb * ns];
    for b in 0..nb {
        for s in 0..ns {
            beta[b * ns + s] = blocks[b].tonnage;
        }
    }
    for metal in 0..config.num_metals {
        for b in 0..nb {
            for s in 0..ns {
                beta[((1 + metal) * nb + b) * ns + s] =
                    blocks[b].tonnage * grades[(metal * nb + b) * ns + s];
            }
        }
    }
    let scenarios = ScenarioSet::new(num_primary, nb, ns, beta)?;

    // Group blocks by grade, one k-means run per mine.
    let mut blocks_of_mine = vec![Vec::new(); locations.len()];
    for b in &blocks {
        blocks_of_mine[b.mine as usize].push(b.id);
    }
    let mut destinations: Vec<LocationId> = Vec::new();
    destinations.extend(&processors);
    destinations.extend(&stockpiles);
    destinations.push(waste);
    let input = ClusterInput {
        mines: &mines,
        blocks_of_mine: &blocks_of_mine,
        num_scenarios: ns,
        destinations,
        grades: Box::new(|b, s| {
            (0..config.num_metals).map(|m| grades[(m * nb + b as usize) * ns + s]).collect()
        }),
    };
    let cluster_seed = seed ^ 0x6b7a_9c3d_5e1f_0a24;
    let (groups, memberships) =
        cluster_blocks(&input, config.clusters_per_mine, config.kmeans_max_iter, cluster_seed)?;

    // Flow arcs: stockpiles feed every processor.
    let mut flow_arcs = Vec::new();
    for &sp in &stockpiles {
        for &p in &processors {
            flow_arcs.push((sp, p));
        }
    }

    // Hereditary attributes with bounds and penalties.
    let eco = &config.economics;
    let cap = &config.capacities;
    let total_tonnage = config.block_tonnage * nb as f64;
    let mine_tonnage = config.block_tonnage * bpm as f64;
    let mut attrs: Vec<HereditaryAttr> = Vec::new();
    let mut push_attr = |name: String,
                         location: LocationId,
                         form: AttrForm,
                         price: f64,
                         risk: &str,
                         lower: Option<f64>,
                         upper: Option<f64>,
                         pen_plus: f64,
                         pen_minus: f64| {
        attrs.push(HereditaryAttr {
            id: attrs.len() as u32,
            name,
            location,
            form,
            price_base: price,
            price_discount: "d1".into(),
            penalty_plus_base: pen_plus,
            penalty_minus_base: pen_minus,
            risk_discount: risk.into(),
            lower_base: lower.map(|v| vec![v; t]),
            upper_base: upper.map(|v| vec![v; t]),
            price: Vec::new(),
            penalty_plus: Vec::new(),
            penalty_minus: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        });
    };
    let tonnage_form = || AttrForm::Linear { constant: 0.0, coeffs: vec![(0, 1.0)] };
    for &m in &mines {
        push_attr(
            "mined_tonnage".into(),
            m,
            tonnage_form(),
            -eco.mining_cost,
            "d2",
            None,
            Some(mine_tonnage / t as f64 * cap.mining_factor),
            cap.mining_surplus_penalty,
            0.0,
        );
    }
    let per_proc = total_tonnage / t as f64 / config.num_processors.max(1) as f64;
    for &p in &processors {
        push_attr(
            "processed_tonnage".into(),
            p,
            tonnage_form(),
            -eco.processing_cost,
            "d3",
            Some(per_proc * cap.processing_lower_factor),
            Some(per_proc * cap.processing_upper_factor),
            cap.processing_surplus_penalty,
            cap.processing_shortage_penalty,
        );
        push_attr(
            "recovered_metal".into(),
            p,
            AttrForm::Linear {
                constant: 0.0,
                coeffs: (0..config.num_metals).map(|m| (1 + m, eco.recovery)).collect(),
            },
            eco.metal_price,
            "d3",
            None,
            None,
            0.0,
            0.0,
        );
    }
    for &sp in &stockpiles {
        push_attr(
            "stock_quantity".into(),
            sp,
            AttrForm::StockCarry { primary: 0 },
            0.0,
            "d6",
            None,
            Some(total_tonnage / t as f64 * cap.stockpile_factor),
            cap.stockpile_surplus_penalty,
            0.0,
        );
    }
    push_attr(
        "waste_tonnage".into(),
        waste,
        tonnage_form(),
        -eco.waste_cost,
        "d1",
        None,
        None,
        0.0,
        0.0,
    );

    let mut discounts = Discounts::new();
    discounts.insert("d1".into(), eco.cash_discount);
    for d in ["d2", "d3", "d4", "d5", "d6"] {
        discounts.insert(d.into(), eco.risk_discount);
    }

    MiningComplexInstance::new(
        config.name.clone(),
        t,
        std::iter::once("tonnage".to_string())
            .chain((0..config.num_metals).map(|m| format!("metal_{m}")))
            .collect(),
        blocks,
        scenarios,
        locations,
        flow_arcs,
        groups,
        memberships,
        attrs,
        discounts,
    )
}
