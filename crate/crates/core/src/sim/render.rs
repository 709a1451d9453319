//! Top-down orthographic rasterizer for the overhead observation.

use super::{Layout, ObjectKind, SimState, WORKSPACE_MAX, WORKSPACE_MIN};
use crate::image::Image;
use crate::Vec3;

pub const IMAGE_SIZE: u32 = 128;
pub const METERS_PER_PIXEL: f64 = (WORKSPACE_MAX[0] - WORKSPACE_MIN[0]) / IMAGE_SIZE as f64;
/// The end effector is only visible to the overhead camera below this height.
pub const CAMERA_CLEARANCE: f64 = 0.30;

const BACKGROUND: [u8; 3] = [236, 232, 222];
const BLOCK: [u8; 3] = [200, 40, 40];
const CONTAINER: [u8; 3] = [50, 80, 200];
const HANDLE: [u8; 3] = [40, 150, 60];
const LID: [u8; 3] = [220, 190, 30];
const TARGET: [u8; 3] = [90, 90, 90];
const GRIPPER: [u8; 3] = [0, 0, 0];

/// Continuous pixel coordinates (column, row) of a workspace point; +x is to
/// the right, +y is up in the image.
pub fn pixel_of(p: &Vec3) -> (f64, f64) {
    (
        (p.x - WORKSPACE_MIN[0]) / METERS_PER_PIXEL,
        (WORKSPACE_MAX[1] - p.y) / METERS_PER_PIXEL,
    )
}

fn fill_disc(img: &mut Image, center: &Vec3, radius: f64, rgb: [u8; 3]) {
    let (cx, cy) = pixel_of(center);
    let r = radius / METERS_PER_PIXEL;
    for y in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
        for x in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= r * r {
                img.put(x, y, rgb);
            }
        }
    }
}

fn ring(img: &mut Image, center: &Vec3, radius: f64, rgb: [u8; 3]) {
    let (cx, cy) = pixel_of(center);
    let r = radius / METERS_PER_PIXEL;
    for y in (cy - r - 1.0).floor() as i64..=(cy + r + 1.0).ceil() as i64 {
        for x in (cx - r - 1.0).floor() as i64..=(cx + r + 1.0).ceil() as i64 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let d = (dx * dx + dy * dy).sqrt();
            if (d - r).abs() <= 0.75 {
                img.put(x, y, rgb);
            }
        }
    }
}

fn fill_square(img: &mut Image, center: &Vec3, half: f64, rgb: [u8; 3]) {
    let (cx, cy) = pixel_of(center);
    let h = half / METERS_PER_PIXEL;
    for y in (cy - h).round() as i64..(cy + h).round() as i64 {
        for x in (cx - h).round() as i64..(cx + h).round() as i64 {
            img.put(x, y, rgb);
        }
    }
}

/// Deterministic 128x128 RGB raster of `state` as seen from above.
pub fn render(state: &SimState) -> Image {
    let mut img = Image::filled(IMAGE_SIZE, IMAGE_SIZE, BACKGROUND);
    if let Layout::HandOver { target } = &state.layout {
        ring(&mut img, target, super::HANDOVER_TOLERANCE, TARGET);
    }
    // Containers first so objects inside them stay visible.
    let mut objects: Vec<_> = state.objects.values().collect();
    objects.sort_by_key(|o| o.kind != ObjectKind::Container);
    for o in objects {
        match o.kind {
            ObjectKind::Container => fill_disc(&mut img, &o.position, o.size, CONTAINER),
            ObjectKind::Block => fill_square(&mut img, &o.position, o.size, BLOCK),
            ObjectKind::Handle => fill_square(&mut img, &o.position, o.size, HANDLE),
            ObjectKind::Lid => fill_disc(&mut img, &o.position, o.size, LID),
        }
    }
    let ee = state.ee();
    if ee.z < CAMERA_CLEARANCE {
        let (cx, cy) = pixel_of(&ee);
        let (cx, cy) = (cx.floor() as i64, cy.floor() as i64);
        for d in -3..=3 {
            img.put(cx + d, cy, GRIPPER);
            img.put(cx, cy + d, GRIPPER);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::super::{Simulator, PICK_PLACE};
    use super::*;
    use crate::types::{SeedId, TaskId};

    fn red_centroid(img: &Image) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.pixel(x, y) == BLOCK {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1.0;
                }
            }
        }
        (sx / n, sy / n)
    }

    #[test]
    fn render_is_deterministic() {
        let s = Simulator::default()
            .spawn(&TaskId::new(PICK_PLACE), SeedId(9))
            .unwrap();
        assert_eq!(render(&s).as_bytes(), render(&s).as_bytes());
    }

    #[test]
    fn moving_block_shifts_its_pixels() {
        let mut s = Simulator::default()
            .spawn(&TaskId::new(PICK_PLACE), SeedId(2))
            .unwrap();
        // Keep the block clear of the bowl so no pixels are shared.
        s.objects.get_mut("bowl").unwrap().position = Vec3::new(0.25, 0.25, 0.0);
        s.objects.get_mut("block").unwrap().position = Vec3::new(-0.2, 0.0, 0.02);
        let before = red_centroid(&render(&s));
        s.objects.get_mut("block").unwrap().position = Vec3::new(-0.15, 0.0, 0.02);
        let after = red_centroid(&render(&s));
        // 0.05 m at 0.005 m/px.
        assert!((after.0 - before.0 - 10.0).abs() < 1e-9);
        assert!((after.1 - before.1).abs() < 1e-9);
    }

    #[test]
    fn empty_table_is_background_only() {
        let mut s = Simulator::default()
            .spawn(&TaskId::new(PICK_PLACE), SeedId(0))
            .unwrap();
        s.objects.clear();
        let img = render(&s);
        assert_eq!(img, Image::filled(IMAGE_SIZE, IMAGE_SIZE, BACKGROUND));
    }

    #[test]
    fn low_gripper_is_drawn() {
        let mut s = Simulator::default()
            .spawn(&TaskId::new(PICK_PLACE), SeedId(0))
            .unwrap();
        s.objects.clear();
        s.robot = s.robot.with_position(Vec3::new(0.0, 0.0, 0.1)).unwrap();
        assert_eq!(render(&s).pixel(64, 64), GRIPPER);
    }
}
