//! Mock firmware: serves the serial protocol on top of kinematics and the
//! dial environment, with per-robot imperfections standing in for the
//! physical differences between printed robots.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{encode_command, encode_response, parse_command, Command, ErrCode, Response};
use crate::dial_env::DialEnv;
use crate::kinematics::{
    forward_kinematics_arms, in_workspace, inverse_kinematics_arms, ArmGeometry, CartesianPoint,
    JointAngles, RobotGeometry, WorkspaceCylinder,
};

/// What distinguishes one physical robot from another: per-arm link-length
/// factors, command quantization of the hobby servos, and constant angle
/// offsets from assembly. `seed` doubles as the robot's identity when runs
/// are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotImperfection {
    pub geometry_scale: [f64; 3],
    pub servo_quantum: f64,
    pub angle_bias: [f64; 3],
    pub seed: u64,
}

impl RobotImperfection {
    /// The ideal robot: protocol-mediated motion reproduces commanded
    /// positions exactly.
    pub fn identity() -> Self {
        RobotImperfection {
            geometry_scale: [1.0; 3],
            servo_quantum: 0.0,
            angle_bias: [0.0; 3],
            seed: 0,
        }
    }

    /// Draw a plausible printed-robot profile: link lengths within +/-2%,
    /// 1 degree servo resolution, assembly bias within +/-1 degree.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut geometry_scale = [0.0; 3];
        for s in &mut geometry_scale {
            *s = 1.0 + rng.random_range(-0.02..0.02);
        }
        let mut angle_bias = [0.0; 3];
        for b in &mut angle_bias {
            *b = rng.random_range(-1.0..1.0);
        }
        RobotImperfection {
            geometry_scale,
            servo_quantum: 1.0,
            angle_bias,
            seed,
        }
    }

    /// The three robot profiles the benchmark ships with.
    pub fn shipped() -> Vec<Self> {
        [101, 102, 103].map(Self::from_seed).to_vec()
    }
}

/// One firmware instance: a session serving the protocol for one robot.
#[derive(Debug, Clone)]
pub struct MockFirmware {
    arms: ArmGeometry,
    workspace: WorkspaceCylinder,
    imperfection: RobotImperfection,
    env: DialEnv,
    /// Realized effector position after the last motion.
    position: CartesianPoint,
}

impl MockFirmware {
    pub fn new(
        geom: &RobotGeometry,
        workspace: WorkspaceCylinder,
        imperfection: RobotImperfection,
        env: DialEnv,
    ) -> Self {
        let arms = geom.arms_scaled(imperfection.geometry_scale);
        let home = Self::realized(&arms, &imperfection, JointAngles::splat(0.0))
            .unwrap_or(CartesianPoint::new(0.0, 0.0, workspace.z_top));
        MockFirmware {
            arms,
            workspace,
            imperfection,
            env,
            position: home,
        }
    }

    pub fn env(&self) -> &DialEnv {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut DialEnv {
        &mut self.env
    }

    pub fn position(&self) -> CartesianPoint {
        self.position
    }

    fn quantize(&self, angles: JointAngles) -> JointAngles {
        let q = self.imperfection.servo_quantum;
        let bias = self.imperfection.angle_bias;
        let mut a = angles.as_array();
        for (i, v) in a.iter_mut().enumerate() {
            if q > 0.0 {
                *v = (*v / q).round() * q;
            }
            *v += bias[i];
        }
        JointAngles::from_array(a)
    }

    fn realized(
        arms: &ArmGeometry,
        imperfection: &RobotImperfection,
        commanded: JointAngles,
    ) -> Option<CartesianPoint> {
        let q = imperfection.servo_quantum;
        let mut a = commanded.as_array();
        for (i, v) in a.iter_mut().enumerate() {
            if q > 0.0 {
                *v = (*v / q).round() * q;
            }
            *v += imperfection.angle_bias[i];
        }
        forward_kinematics_arms(JointAngles::from_array(a), arms).ok()
    }

    /// Drive the realized effector position to the pose reached by the
    /// (quantized, biased) angles, feeding the straight-line motion into the
    /// environment's contact model.
    fn move_to(&mut self, commanded: JointAngles) -> Response {
        let actual = self.quantize(commanded);
        let target = match forward_kinematics_arms(actual, &self.arms) {
            Ok(p) => p,
            Err(_) => return Response::Err(ErrCode::Unreachable),
        };
        let from = self.position;
        self.env.sweep_segment(&from, &target);
        self.position = target;
        Response::Ok
    }

    pub fn handle_command(&mut self, cmd: &Command) -> Response {
        match *cmd {
            Command::GotoXyz { x, y, z } => {
                let p = CartesianPoint::new(x, y, z);
                if !in_workspace(&p, &self.workspace) {
                    return Response::Err(ErrCode::OutOfWorkspace);
                }
                match inverse_kinematics_arms(&p, &self.arms) {
                    Ok(angles) => self.move_to(angles),
                    Err(_) => Response::Err(ErrCode::Unreachable),
                }
            }
            Command::SetAngles { a, b, c } => {
                if [a, b, c]
                    .iter()
                    .any(|v| *v < self.arms.servo_min || *v > self.arms.servo_max)
                {
                    return Response::Err(ErrCode::Unreachable);
                }
                self.move_to(JointAngles::new(a, b, c))
            }
            Command::ReadPot => Response::Pot(self.env.read_adc()),
            Command::Home => {
                let home = self.move_to(JointAngles::splat(0.0));
                if home != Response::Ok {
                    return home;
                }
                match self.env.reset() {
                    Ok(_) => Response::Ok,
                    Err(_) => Response::Err(ErrCode::Unreachable),
                }
            }
        }
    }

    /// One protocol exchange: a request line in, a response line out.
    /// Malformed requests answer `ERR BAD_CMD`.
    pub fn handle_line(&mut self, line: &str) -> String {
        match parse_command(line) {
            Ok(cmd) => encode_response(&self.handle_command(&cmd)),
            Err(_) => encode_response(&Response::Err(ErrCode::BadCmd)),
        }
    }

    /// Serve a bidirectional line stream until it closes. Works over any
    /// `BufRead`/`Write` pair (in-memory buffers, TCP streams, PTYs).
    pub fn serve<R: BufRead, W: Write>(&mut self, reader: R, mut writer: W) -> std::io::Result<()> {
        for line in reader.lines() {
            let line = line?;
            writer.write_all(self.handle_line(&line).as_bytes())?;
            writer.flush()?;
        }
        Ok(())
    }
}

/// Anything that can carry one request line and return one response line.
pub trait LineTransport {
    fn request(&mut self, line: &str) -> Result<String, std::io::Error>;
}

/// Loopback transport: the firmware lives in the same process. Every
/// exchange still round-trips through the full text codec.
pub struct InProcessTransport {
    firmware: MockFirmware,
}

impl InProcessTransport {
    pub fn new(firmware: MockFirmware) -> Self {
        InProcessTransport { firmware }
    }

    pub fn firmware(&self) -> &MockFirmware {
        &self.firmware
    }
}

impl LineTransport for InProcessTransport {
    fn request(&mut self, line: &str) -> Result<String, std::io::Error> {
        Ok(self.firmware.handle_line(line))
    }
}

/// Typed client over a line transport.
pub struct DeviceClient<T: LineTransport> {
    transport: T,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClientError {
    #[error("device answered ERR {0:?}")]
    Device(ErrCode),
    #[error("protocol violation: {0}")]
    Protocol(#[from] super::ProtocolError),
    #[error("unexpected response {0:?}")]
    Unexpected(Response),
    #[error("transport failed: {0}")]
    Transport(String),
}

impl<T: LineTransport> DeviceClient<T> {
    pub fn new(transport: T) -> Self {
        DeviceClient { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn exchange(&mut self, cmd: &Command) -> Result<Response, ClientError> {
        let line = encode_command(cmd);
        let reply = self
            .transport
            .request(&line)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(super::parse_response(&reply)?)
    }

    fn expect_ok(&mut self, cmd: &Command) -> Result<(), ClientError> {
        match self.exchange(cmd)? {
            Response::Ok => Ok(()),
            Response::Err(code) => Err(ClientError::Device(code)),
            other => Err(ClientError::Unexpected(other)),
        }
    }

    pub fn goto(&mut self, p: &CartesianPoint) -> Result<(), ClientError> {
        self.expect_ok(&Command::GotoXyz {
            x: p.x,
            y: p.y,
            z: p.z,
        })
    }

    pub fn set_angles(&mut self, angles: &JointAngles) -> Result<(), ClientError> {
        self.expect_ok(&Command::SetAngles {
            a: angles.theta_a,
            b: angles.theta_b,
            c: angles.theta_c,
        })
    }

    pub fn home(&mut self) -> Result<(), ClientError> {
        self.expect_ok(&Command::Home)
    }

    pub fn read_pot(&mut self) -> Result<u16, ClientError> {
        match self.exchange(&Command::ReadPot)? {
            Response::Pot(v) => Ok(v),
            Response::Err(code) => Err(ClientError::Device(code)),
            other => Err(ClientError::Unexpected(other)),
        }
    }
}
