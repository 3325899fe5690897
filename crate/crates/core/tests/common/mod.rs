//! Analytic fixtures shared by the integration tests: the 2×1 rectangle in
//! uniform tension with an optional central bar load.
#![allow(dead_code)]

use fmd_core::checker::{AnalyticQuadruple, AreaPart, DisplacementField, LinePart, MeasurePart, QuadruplePart};
use fmd_core::grid::{Grid, LoadSpec, PointLoad, SegmentLoad};
use fmd_core::tensor::{dyadic, iso_hooke, SQRT2};
use fmd_core::{HookeTensor, SymTensor2};

pub const A: f64 = 2.0;
pub const B: f64 = 1.0;

/// Edge densities `±q e₁` on the short sides plus point forces `±Q e₁` at their midpoints.
pub fn tension_loads(q: f64, big_q: f64) -> LoadSpec {
    let (ha, hb) = (0.5 * A, 0.5 * B);
    let mut loads = LoadSpec {
        point_loads: vec![],
        segment_loads: vec![
            SegmentLoad { start: [ha, -hb], end: [ha, hb], density: [q, 0.0] },
            SegmentLoad { start: [-ha, -hb], end: [-ha, hb], density: [-q, 0.0] },
        ],
    };
    if big_q != 0.0 {
        loads.point_loads.push(PointLoad { position: [ha, 0.0], force: [big_q, 0.0] });
        loads.point_loads.push(PointLoad { position: [-ha, 0.0], force: [-big_q, 0.0] });
    }
    loads
}

pub fn rectangle_grid(nx: usize) -> Grid {
    Grid::new([-0.5 * A, -0.5 * B], A / nx as f64, nx, nx / 2).unwrap()
}

fn parts(q: f64, big_q: f64, scale: f64, sigma: SymTensor2, hooke: HookeTensor) -> Vec<QuadruplePart> {
    let (ha, hb) = (0.5 * A, 0.5 * B);
    let mut out = vec![QuadruplePart {
        support: MeasurePart::Area(AreaPart { lo: [-ha, -hb], hi: [ha, hb], density: scale * q }),
        sigma,
        hooke: hooke.clone(),
    }];
    if big_q != 0.0 {
        out.push(QuadruplePart {
            support: MeasurePart::Line(LinePart { start: [-ha, 0.0], end: [ha, 0.0], density: scale * big_q }),
            sigma,
            hooke,
        });
    }
    out
}

pub fn e11() -> SymTensor2 {
    SymTensor2::diag2(1.0, 0.0)
}

/// Anisotropic design: `u = x₁e₁`, unit uniaxial stress, uniaxial stiffness.
pub fn anisotropic_case(q: f64, big_q: f64) -> AnalyticQuadruple {
    AnalyticQuadruple {
        u: DisplacementField::affine([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0]),
        parts: parts(q, big_q, 1.0, e11(), dyadic(&e11())),
    }
}

/// Fibrous design with the transverse displacement `sin(x₂)`, which is 1-Lipschitz.
pub fn fibrous_case(q: f64, big_q: f64) -> AnalyticQuadruple {
    AnalyticQuadruple {
        u: DisplacementField::new(|x| [x[0], x[1].sin()], |x| [[1.0, 0.0], [0.0, x[1].cos()]]),
        parts: parts(q, big_q, 1.0, e11(), dyadic(&e11())),
    }
}

/// Optimal isotropic moduli for uniaxial stress.
pub fn optimal_moduli() -> (f64, f64) {
    (1.0 / (2.0 + 2.0 * SQRT2), 1.0 / (4.0 + 2.0 * SQRT2))
}

/// Isotropic design with coefficient `c = (2+√2)/2`.
pub fn isotropic_case(q: f64, big_q: f64) -> AnalyticQuadruple {
    let c = (2.0 + SQRT2) / 2.0;
    let c2 = (2.0 - SQRT2) / 2.0;
    let (k, g) = optimal_moduli();
    AnalyticQuadruple {
        u: DisplacementField::affine([[c, 0.0], [0.0, -c2]], [0.0, 0.0]),
        parts: parts(q, big_q, c, e11().scale(1.0 / c), iso_hooke(k, g, 2).unwrap()),
    }
}
