//! Planar minigolf: a club head follows a trajectory, may strike the ball
//! once, and the ball rolls to rest under constant friction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::promp::Trajectory;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourseConfig {
    pub ball_start: Point,
    pub hole_center: Point,
    pub hole_radius: f64,
    pub ball_radius: f64,
    pub club_radius: f64,
    /// Rolling deceleration in m/s².
    pub friction_decel: f64,
    pub restitution: f64,
    /// Longest roll simulated after contact, in seconds.
    pub max_sim_time: f64,
    pub timestep: f64,
    /// The ball drops only when it is over the cup at or below this speed.
    pub capture_speed: f64,
}

fn default_capture_speed() -> f64 {
    0.5
}

impl Default for CourseConfig {
    fn default() -> Self {
        Self {
            ball_start: [0.0, 0.0],
            hole_center: [1.2, 0.0],
            hole_radius: 0.054,
            ball_radius: 0.021,
            club_radius: 0.03,
            friction_decel: 0.6,
            restitution: 0.9,
            max_sim_time: 10.0,
            timestep: 0.005,
            capture_speed: default_capture_speed(),
        }
    }
}

impl CourseConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.hole_radius)
            && pos(self.ball_radius)
            && pos(self.club_radius)
            && pos(self.friction_decel)
            && pos(self.max_sim_time)
            && pos(self.timestep)
            && pos(self.capture_speed))
        {
            return Err(Error::Config("course lengths, times and friction must be positive".into()));
        }
        if !(self.restitution > 0.0 && self.restitution <= 1.0) {
            return Err(Error::Config("restitution must lie in (0, 1]".into()));
        }
        if dist(self.ball_start, self.hole_center) <= self.hole_radius {
            return Err(Error::Config("ball starts inside the hole".into()));
        }
        Ok(())
    }

    /// Club and ball touch when their centers are this close.
    pub fn contact_radius(&self) -> f64 {
        self.club_radius + self.ball_radius
    }

    pub fn start_to_hole(&self) -> f64 {
        dist(self.ball_start, self.hole_center)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvOutcome {
    pub ball_final: Point,
    pub hit: bool,
    pub distance_to_hole: f64,
    /// Club speed along the contact normal at impact; 0 without contact.
    pub impact_speed: f64,
    pub contact_made: bool,
}

impl EnvOutcome {
    /// Signed progress of the ball along the start-to-hole line, relative to
    /// the hole center: negative when short, positive when long.
    pub fn along_line_offset(&self, course: &CourseConfig) -> f64 {
        let axis = sub(course.hole_center, course.ball_start);
        let len = norm(axis);
        dot(sub(self.ball_final, course.hole_center), axis) / len
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// First club-ball contact found along the piecewise-linear club path.
struct Contact {
    normal: Point,
    club_velocity: Point,
}

fn find_contact(traj: &Trajectory, course: &CourseConfig) -> Option<Contact> {
    let ball = course.ball_start;
    let radius = course.contact_radius();
    for k in 1..traj.positions.len() {
        let p0 = [traj.positions[k - 1][0], traj.positions[k - 1][1]];
        let p1 = [traj.positions[k][0], traj.positions[k][1]];
        let dt = traj.timestamps[k] - traj.timestamps[k - 1];
        let d = sub(p1, p0);
        let velocity = [d[0] / dt, d[1] / dt];
        let f = sub(p0, ball);
        let c = dot(f, f) - radius * radius;
        if c <= 0.0 {
            // Segment starts in contact: it pushes only if it closes in.
            let gap = norm(f);
            let normal = if gap > 0.0 {
                [-f[0] / gap, -f[1] / gap]
            } else {
                let speed = norm(velocity);
                if speed == 0.0 {
                    continue;
                }
                [velocity[0] / speed, velocity[1] / speed]
            };
            if dot(velocity, normal) > 0.0 {
                return Some(Contact {
                    normal,
                    club_velocity: velocity,
                });
            }
            continue;
        }
        let a = dot(d, d);
        if a == 0.0 {
            continue;
        }
        let b = 2.0 * dot(f, d);
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let s = (-b - disc.sqrt()) / (2.0 * a);
        if !(0.0..=1.0).contains(&s) {
            continue;
        }
        let at = [p0[0] + s * d[0], p0[1] + s * d[1]];
        let n = sub(ball, at);
        let gap = norm(n);
        let normal = [n[0] / gap, n[1] / gap];
        if dot(velocity, normal) > 0.0 {
            return Some(Contact {
                normal,
                club_velocity: velocity,
            });
        }
    }
    None
}

/// Rolls one trajectory through the course. Pure and deterministic.
pub fn simulate(trajectory: &Trajectory, course: &CourseConfig) -> Result<EnvOutcome> {
    trajectory.validate()?;
    if trajectory.num_dof() != 2 {
        return Err(Error::InvalidTrajectory(format!(
            "club path must be planar, got {} dof",
            trajectory.num_dof()
        )));
    }
    let no_contact = EnvOutcome {
        ball_final: course.ball_start,
        hit: false,
        distance_to_hole: course.start_to_hole(),
        impact_speed: 0.0,
        contact_made: false,
    };
    let Some(contact) = find_contact(trajectory, course) else {
        return Ok(no_contact);
    };

    let impact_speed = dot(contact.club_velocity, contact.normal);
    let dir = contact.normal;
    let mut speed = course.restitution * impact_speed;
    let mut pos = course.ball_start;
    let a = course.friction_decel;
    let dt = course.timestep;
    let max_steps = (course.max_sim_time / dt).ceil() as usize;

    for _ in 0..max_steps {
        if speed <= 0.0 {
            break;
        }
        // Exact uniform-deceleration kinematics over one step.
        let step = if speed > a * dt {
            let s = speed * dt - 0.5 * a * dt * dt;
            speed -= a * dt;
            s
        } else {
            let s = speed * speed / (2.0 * a);
            speed = 0.0;
            s
        };
        pos = [pos[0] + dir[0] * step, pos[1] + dir[1] * step];
        if speed <= course.capture_speed && dist(pos, course.hole_center) <= course.hole_radius {
            return Ok(EnvOutcome {
                ball_final: course.hole_center,
                hit: true,
                distance_to_hole: 0.0,
                impact_speed,
                contact_made: true,
            });
        }
    }

    Ok(EnvOutcome {
        ball_final: pos,
        hit: false,
        distance_to_hole: dist(pos, course.hole_center),
        impact_speed,
        contact_made: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight club path along +x at constant speed, ending at the ball.
    fn strike(speed: f64, y: f64) -> Trajectory {
        let n = 50;
        let dt = 0.01;
        let start = -speed * dt * (n - 1) as f64;
        Trajectory {
            timestamps: (0..n).map(|i| i as f64 * dt).collect(),
            positions: (0..n).map(|i| vec![start + speed * dt * i as f64, y]).collect(),
            speed_factor: 1.0,
        }
    }

    #[test]
    fn far_path_makes_no_contact() {
        let course = CourseConfig::default();
        let traj = Trajectory {
            timestamps: vec![0.0, 1.0],
            positions: vec![vec![0.0, 1.0], vec![1.0, 1.0]],
            speed_factor: 1.0,
        };
        let out = simulate(&traj, &course).unwrap();
        assert!(!out.contact_made && !out.hit);
        assert_eq!(out.ball_final, course.ball_start);
        assert_eq!(out.impact_speed, 0.0);
    }

    #[test]
    fn perfect_putt_drops() {
        let course = CourseConfig::default();
        let v_ball = (2.0 * course.friction_decel * 1.2f64).sqrt();
        let out = simulate(&strike(v_ball / course.restitution, 0.0), &course).unwrap();
        assert!(out.hit);
        assert_eq!(out.distance_to_hole, 0.0);
        assert!((out.impact_speed - v_ball / course.restitution).abs() < 1e-9);
    }

    #[test]
    fn fast_ball_rolls_over() {
        let course = CourseConfig::default();
        let out = simulate(&strike(3.0, 0.0), &course).unwrap();
        assert!(out.contact_made && !out.hit);
        assert!(out.along_line_offset(&course) > 0.0);
    }

    #[test]
    fn offset_strike_goes_sideways() {
        let course = CourseConfig::default();
        let out = simulate(&strike(1.4, 0.03), &course).unwrap();
        assert!(out.contact_made);
        assert!(out.ball_final[1] < 0.0);
    }

    #[test]
    fn receding_club_does_not_push() {
        let course = CourseConfig::default();
        let traj = Trajectory {
            timestamps: vec![0.0, 0.1, 0.2],
            positions: vec![vec![-0.01, 0.0], vec![-0.2, 0.0], vec![-0.4, 0.0]],
            speed_factor: 1.0,
        };
        assert!(!simulate(&traj, &course).unwrap().contact_made);
    }

    #[test]
    fn single_point_is_invalid() {
        let traj = Trajectory {
            timestamps: vec![0.0],
            positions: vec![vec![0.0, 0.0]],
            speed_factor: 1.0,
        };
        assert!(matches!(
            simulate(&traj, &CourseConfig::default()),
            Err(Error::InvalidTrajectory(_))
        ));
    }

    #[test]
    fn course_validation() {
        CourseConfig::default().validate().unwrap();
        let bad = CourseConfig {
            hole_center: [0.01, 0.0],
            ..CourseConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
