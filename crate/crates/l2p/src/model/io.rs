//! Instance file format: a single self-describing UTF-8 JSON document with
//! top-level keys `meta`, `blocks`, `scenarios`, `locations`, `arcs`,
//! `groups`, `bounds`, `penalties`, `prices` and `discounts`.
//!
//! Array layouts (all row-major):
//! * `scenarios.beta` — `[primary][block][scenario]`
//! * `groups.memberships` — `[block][scenario]`
//! * per-period arrays (`bounds.*`) — index `t - 1` holds period `t`
//!
//! Floating-point numbers are written with 17 significant digits so a
//! round-trip through the file reproduces every value bit-exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use super::{
    AttrForm, AttrId, Block, BlockId, Discounts, GroupId, HereditaryAttr, LocationId,
    LocationKind, LocationNode, MiningComplexInstance, ModelError, Recovery, ScenarioSet,
};

#[derive(Serialize, Deserialize)]
struct MetaF {
    name: String,
    format_version: u32,
    horizon: usize,
    num_scenarios: usize,
    primary_attributes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BlockF {
    id: BlockId,
    mine: LocationId,
    pos: [i64; 3],
    tonnage: f64,
    preds: Vec<BlockId>,
}

#[derive(Serialize, Deserialize)]
struct ScenariosF {
    count: usize,
    beta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AttrDefF {
    id: AttrId,
    name: String,
    form: AttrForm,
}

#[derive(Serialize, Deserialize)]
struct LocationF {
    id: LocationId,
    name: String,
    kind: LocationKind,
    recovery: Recovery,
    attributes: Vec<AttrDefF>,
}

#[derive(Serialize, Deserialize)]
struct GroupF {
    id: GroupId,
    mine: LocationId,
    destinations: Vec<LocationId>,
}

#[derive(Serialize, Deserialize)]
struct GroupsF {
    list: Vec<GroupF>,
    memberships: Vec<GroupId>,
}

#[derive(Serialize, Deserialize)]
struct BoundF {
    attr: AttrId,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PenaltyF {
    attr: AttrId,
    plus: f64,
    minus: f64,
    risk_discount: String,
}

#[derive(Serialize, Deserialize)]
struct PriceF {
    attr: AttrId,
    base: f64,
    discount: String,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    meta: MetaF,
    blocks: Vec<BlockF>,
    scenarios: ScenariosF,
    locations: Vec<LocationF>,
    arcs: Vec<(LocationId, LocationId)>,
    groups: GroupsF,
    bounds: Vec<BoundF>,
    penalties: Vec<PenaltyF>,
    prices: Vec<PriceF>,
    discounts: Discounts,
}

/// JSON formatter that renders every float with 17 significant digits.
struct SigDigitFormatter;

impl Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.16e}", value)
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }
}

fn to_file(inst: &MiningComplexInstance) -> InstanceFile {
    InstanceFile {
        meta: MetaF {
            name: inst.name.clone(),
            format_version: 1,
            horizon: inst.horizon,
            num_scenarios: inst.num_scenarios(),
            primary_attributes: inst.primary_names.clone(),
        },
        blocks: inst
            .blocks
            .iter()
            .map(|b| BlockF {
                id: b.id,
                mine: b.mine,
                pos: b.pos,
                tonnage: b.tonnage,
                preds: b.preds.clone(),
            })
            .collect(),
        scenarios: ScenariosF { count: inst.num_scenarios(), beta: inst.scenarios.raw().to_vec() },
        locations: inst
            .locations
            .iter()
            .map(|l| LocationF {
                id: l.id,
                name: l.name.clone(),
                kind: l.kind,
                recovery: l.recovery.clone(),
                attributes: l
                    .attrs
                    .iter()
                    .map(|&a| {
                        let attr = &inst.attrs[a as usize];
                        AttrDefF { id: attr.id, name: attr.name.clone(), form: attr.form.clone() }
                    })
                    .collect(),
            })
            .collect(),
        arcs: inst.flow_arcs.clone(),
        groups: GroupsF {
            list: inst
                .groups
                .iter()
                .map(|g| GroupF { id: g.id, mine: g.mine, destinations: g.destinations.clone() })
                .collect(),
            memberships: inst.memberships.clone(),
        },
        bounds: inst
            .attrs
            .iter()
            .filter(|a| a.lower_base.is_some() || a.upper_base.is_some())
            .map(|a| BoundF { attr: a.id, lower: a.lower_base.clone(), upper: a.upper_base.clone() })
            .collect(),
        penalties: inst
            .attrs
            .iter()
            .map(|a| PenaltyF {
                attr: a.id,
                plus: a.penalty_plus_base,
                minus: a.penalty_minus_base,
                risk_discount: a.risk_discount.clone(),
            })
            .collect(),
        prices: inst
            .attrs
            .iter()
            .map(|a| PriceF { attr: a.id, base: a.price_base, discount: a.price_discount.clone() })
            .collect(),
        discounts: inst.discounts.clone(),
    }
}

fn from_file(f: InstanceFile) -> Result<MiningComplexInstance, ModelError> {
    let blocks: Vec<Block> = f
        .blocks
        .into_iter()
        .map(|b| Block { id: b.id, mine: b.mine, pos: b.pos, tonnage: b.tonnage, preds: b.preds })
        .collect();
    let scenarios = ScenarioSet::new(
        f.meta.primary_attributes.len(),
        blocks.len(),
        f.scenarios.count,
        f.scenarios.beta,
    )?;
    let mut attrs: Vec<HereditaryAttr> = Vec::new();
    let mut locations: Vec<LocationNode> = Vec::new();
    for l in f.locations {
        for a in &l.attributes {
            attrs.push(HereditaryAttr {
                id: a.id,
                name: a.name.clone(),
                location: l.id,
                form: a.form.clone(),
                price_base: 0.0,
                price_discount: "d1".into(),
                penalty_plus_base: 0.0,
                penalty_minus_base: 0.0,
                risk_discount: "d1".into(),
                lower_base: None,
                upper_base: None,
                price: Vec::new(),
                penalty_plus: Vec::new(),
                penalty_minus: Vec::new(),
                lower: Vec::new(),
                upper: Vec::new(),
            });
        }
        locations.push(LocationNode {
            id: l.id,
            name: l.name,
            kind: l.kind,
            recovery: l.recovery,
            attrs: Vec::new(),
            outgoing: Vec::new(),
            incoming: Vec::new(),
            incoming_groups: Vec::new(),
        });
    }
    attrs.sort_by_key(|a| a.id);
    let lookup = |attrs: &[HereditaryAttr], id: AttrId| -> Result<usize, ModelError> {
        if (id as usize) < attrs.len() && attrs[id as usize].id == id {
            Ok(id as usize)
        } else {
            Err(ModelError::InvalidInstance(format!("unknown attribute id {id}")))
        }
    };
    for b in f.bounds {
        let i = lookup(&attrs, b.attr)?;
        attrs[i].lower_base = b.lower;
        attrs[i].upper_base = b.upper;
    }
    for p in f.penalties {
        let i = lookup(&attrs, p.attr)?;
        attrs[i].penalty_plus_base = p.plus;
        attrs[i].penalty_minus_base = p.minus;
        attrs[i].risk_discount = p.risk_discount;
    }
    for p in f.prices {
        let i = lookup(&attrs, p.attr)?;
        attrs[i].price_base = p.base;
        attrs[i].price_discount = p.discount;
    }
    let groups = f
        .groups
        .list
        .into_iter()
        .map(|g| super::Group {
            id: g.id,
            mine: g.mine,
            destinations: g.destinations,
            mean_grade: 0.0,
        })
        .collect();
    MiningComplexInstance::new(
        f.meta.name,
        f.meta.horizon,
        f.meta.primary_attributes,
        blocks,
        scenarios,
        locations,
        f.arcs,
        groups,
        f.groups.memberships,
        attrs,
        f.discounts,
    )
}

pub fn write_instance(inst: &MiningComplexInstance, path: &Path) -> Result<(), ModelError> {
    let file = to_file(inst);
    let out = std::fs::File::create(path)?;
    let mut ser = serde_json::Serializer::with_formatter(std::io::BufWriter::new(out), SigDigitFormatter);
    file.serialize(&mut ser)?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<MiningComplexInstance, ModelError> {
    let data = std::fs::read(path)?;
    let file: InstanceFile = serde_json::from_slice(&data)?;
    from_file(file)
}
