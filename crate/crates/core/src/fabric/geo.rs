//! Local-meters distance between GPS fixes.

/// Meters per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = 111_320.0;

/// Equirectangular distance in meters, projected at the pair's mean latitude.
///
/// Accurate to well under a percent at city scale, which is all the 15 m
/// stop rule and the 30 m station radius need.
pub fn geo_distance(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lat1, lon1) = p1;
    let (lat2, lon2) = p2;
    let mean_lat = ((lat1 + lat2) / 2.0).to_radians();
    let dx = (lon2 - lon1) * mean_lat.cos() * METERS_PER_DEGREE;
    let dy = (lat2 - lat1) * METERS_PER_DEGREE;
    (dx * dx + dy * dy).sqrt()
}

/// Moves `meters` north and east of `origin`, inverting the projection above locally.
pub fn offset_meters(origin: (f64, f64), north_m: f64, east_m: f64) -> (f64, f64) {
    let lat = origin.0 + north_m / METERS_PER_DEGREE;
    let lon = origin.1 + east_m / (METERS_PER_DEGREE * origin.0.to_radians().cos());
    (lat, lon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn haversine(p1: (f64, f64), p2: (f64, f64)) -> f64 {
        // Sphere radius chosen so one degree of arc is METERS_PER_DEGREE.
        let r = METERS_PER_DEGREE * 180.0 / std::f64::consts::PI;
        let (phi1, phi2) = (p1.0.to_radians(), p2.0.to_radians());
        let dphi = phi2 - phi1;
        let dlambda = (p2.1 - p1.1).to_radians();
        let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
        2.0 * r * a.sqrt().asin()
    }

    #[test]
    fn identical_points_are_zero() {
        assert_eq!(geo_distance((46.09, -64.79), (46.09, -64.79)), 0.0);
    }

    #[test]
    fn thousandth_degree_latitude_at_equator() {
        let d = geo_distance((0.0, 0.0), (0.001, 0.0));
        assert!((d - 111.32).abs() < 1e-9, "{d}");
        let h = haversine((0.0, 0.0), (0.001, 0.0));
        assert!((d - h).abs() / h < 0.005);
    }

    #[test]
    fn offset_round_trips_distance() {
        let o = (46.1, -64.8);
        let p = offset_meters(o, 0.0, 15.0);
        assert!((geo_distance(o, p) - 15.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn symmetric(a in -60.0f64..60.0, b in -170.0f64..170.0, da in -0.05f64..0.05, db in -0.05f64..0.05) {
            let p = (a, b);
            let q = (a + da, b + db);
            prop_assert_eq!(geo_distance(p, q), geo_distance(q, p));
        }

        #[test]
        fn close_to_haversine_at_city_scale(a in -60.0f64..60.0, b in -170.0f64..170.0, da in -0.05f64..0.05, db in -0.05f64..0.05) {
            let p = (a, b);
            let q = (a + da, b + db);
            let h = haversine(p, q);
            prop_assume!(h > 1.0);
            prop_assert!((geo_distance(p, q) - h).abs() / h < 0.005);
        }
    }
}
