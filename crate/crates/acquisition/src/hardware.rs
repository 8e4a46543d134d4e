//! Physical converter on a Linux SPI bus.
//!
//! The configuration parser is always available; the spidev driver itself
//! needs the `hardware` feature and a Linux target.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::AcquisitionError;

/// Upper bound on the SPI clock accepted from configuration.
pub const MAX_SPI_SPEED_HZ: u32 = 20_000_000;

/// Hardware backend configuration, read from TOML.
///
/// Pin numbers are passed to the kernel GPIO interface unchecked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    pub spi_path: PathBuf,
    #[serde(default = "default_speed")]
    pub spi_speed_hz: u32,
    pub drdy_pin: u32,
    #[serde(default)]
    pub reset_pin: Option<u32>,
    #[serde(default = "default_gpio_root")]
    pub gpio_root: PathBuf,
    #[serde(default = "default_timeout")]
    pub drdy_timeout_ms: u32,
}

fn default_speed() -> u32 {
    2_000_000
}

fn default_gpio_root() -> PathBuf {
    PathBuf::from("/sys/class/gpio")
}

fn default_timeout() -> u32 {
    1000
}

impl HardwareConfig {
    pub fn from_toml(text: &str) -> Result<Self, AcquisitionError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| AcquisitionError::InvalidConfig(e.to_string()))?;
        if cfg.spi_speed_hz == 0 || cfg.spi_speed_hz > MAX_SPI_SPEED_HZ {
            return Err(AcquisitionError::InvalidConfig(format!(
                "spi_speed_hz {} outside 1..={MAX_SPI_SPEED_HZ}",
                cfg.spi_speed_hz
            )));
        }
        if cfg.drdy_timeout_ms == 0 {
            return Err(AcquisitionError::InvalidConfig("drdy_timeout_ms must be positive".into()));
        }
        if cfg.spi_path.as_os_str().is_empty() {
            return Err(AcquisitionError::InvalidConfig("spi_path is empty".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AcquisitionError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

#[cfg(all(feature = "hardware", target_os = "linux"))]
pub use spidev::HardwareBackend;

#[cfg(all(feature = "hardware", target_os = "linux"))]
mod spidev {
    use std::fs::{File, OpenOptions};
    use std::io::{Read, Seek, SeekFrom, Write};
    use std::os::fd::AsRawFd;
    use std::path::Path;
    use std::thread::sleep;
    use std::time::{Duration, Instant};

    use peeg_ads1299::{addr, decode_frame, Command, RegisterFile, DEVICE_ID, FRAME_LEN};

    use super::HardwareConfig;
    use crate::backend::{BackendKind, Capabilities, DeviceBackend, Poll};
    use crate::AcquisitionError;

    const SPI_IOC_MAGIC: u64 = b'k' as u64;
    const SPI_MODE_1: u8 = 0x01;

    const fn iow(nr: u64, size: u64) -> u64 {
        (1 << 30) | (size << 16) | (SPI_IOC_MAGIC << 8) | nr
    }

    const SPI_IOC_WR_MODE: u64 = iow(1, 1);
    const SPI_IOC_WR_BITS_PER_WORD: u64 = iow(3, 1);
    const SPI_IOC_WR_MAX_SPEED_HZ: u64 = iow(4, 4);
    const SPI_IOC_MESSAGE_1: u64 = iow(0, std::mem::size_of::<SpiIocTransfer>() as u64);

    /// `struct spi_ioc_transfer` from linux/spi/spidev.h.
    #[repr(C)]
    #[derive(Default)]
    struct SpiIocTransfer {
        tx_buf: u64,
        rx_buf: u64,
        len: u32,
        speed_hz: u32,
        delay_usecs: u16,
        bits_per_word: u8,
        cs_change: u8,
        tx_nbits: u8,
        rx_nbits: u8,
        word_delay_usecs: u8,
        pad: u8,
    }

    struct Spi {
        file: File,
        speed_hz: u32,
    }

    impl Spi {
        fn open(path: &Path, speed_hz: u32) -> Result<Self, AcquisitionError> {
            let file = OpenOptions::new()
                .read(true)
                .write(true)
                .open(path)
                .map_err(|e| AcquisitionError::BackendUnavailable(format!("{}: {e}", path.display())))?;
            let spi = Self { file, speed_hz };
            spi.ioctl_value(SPI_IOC_WR_MODE, &SPI_MODE_1)?;
            spi.ioctl_value(SPI_IOC_WR_BITS_PER_WORD, &8u8)?;
            spi.ioctl_value(SPI_IOC_WR_MAX_SPEED_HZ, &speed_hz)?;
            Ok(spi)
        }

        fn ioctl_value<T>(&self, request: u64, value: &T) -> Result<(), AcquisitionError> {
            // SAFETY: request matches the pointee type per spidev.h; the pointer outlives the call.
            let rc = unsafe { libc::ioctl(self.file.as_raw_fd(), request as _, value as *const T) };
            if rc < 0 {
                return Err(std::io::Error::last_os_error().into());
            }
            Ok(())
        }

        fn transfer(&self, tx: &[u8], rx: &mut [u8]) -> Result<(), AcquisitionError> {
            assert_eq!(tx.len(), rx.len());
            let xfer = SpiIocTransfer {
                tx_buf: tx.as_ptr() as u64,
                rx_buf: rx.as_mut_ptr() as u64,
                len: tx.len() as u32,
                speed_hz: self.speed_hz,
                bits_per_word: 8,
                ..Default::default()
            };
            self.ioctl_value(SPI_IOC_MESSAGE_1, &xfer)
        }

        fn write(&self, tx: &[u8]) -> Result<(), AcquisitionError> {
            let mut rx = vec![0u8; tx.len()];
            self.transfer(tx, &mut rx)
        }
    }

    struct Pin {
        value: File,
    }

    impl Pin {
        fn export(root: &Path, pin: u32, direction: &str) -> Result<Self, AcquisitionError> {
            let dir = root.join(format!("gpio{pin}"));
            if !dir.exists() {
                std::fs::write(root.join("export"), pin.to_string())?;
                // udev needs a moment to fix permissions on the new node
                sleep(Duration::from_millis(100));
            }
            std::fs::write(dir.join("direction"), direction)?;
            let value = OpenOptions::new()
                .read(true)
                .write(direction == "out")
                .open(dir.join("value"))?;
            Ok(Self { value })
        }

        fn read(&mut self) -> Result<bool, AcquisitionError> {
            let mut buf = [0u8; 1];
            self.value.seek(SeekFrom::Start(0))?;
            self.value.read_exact(&mut buf)?;
            Ok(buf[0] == b'1')
        }

        fn set(&mut self, high: bool) -> Result<(), AcquisitionError> {
            self.value.write_all(if high { b"1" } else { b"0" })?;
            Ok(())
        }
    }

    /// ADS1299 on spidev with DRDY (active low) on a sysfs GPIO.
    pub struct HardwareBackend {
        config: HardwareConfig,
        spi: Option<Spi>,
        drdy: Option<Pin>,
    }

    impl HardwareBackend {
        pub fn new(config: HardwareConfig) -> Self {
            Self {
                config,
                spi: None,
                drdy: None,
            }
        }

        fn spi(&self) -> Result<&Spi, AcquisitionError> {
            self.spi
                .as_ref()
                .ok_or_else(|| AcquisitionError::Backend("device not open".into()))
        }

        fn command(&self, cmd: Command) -> Result<(), AcquisitionError> {
            let bytes = cmd.opcode().map_err(AcquisitionError::Register)?;
            self.spi()?.write(&bytes)
        }

        fn write_range(&self, rf: &RegisterFile, first: u8, last: u8) -> Result<(), AcquisitionError> {
            let count = last - first + 1;
            let mut tx = Command::Wreg { addr: first, count }
                .opcode()
                .map_err(AcquisitionError::Register)?;
            tx.extend_from_slice(&rf.as_bytes()[first as usize..=last as usize]);
            self.spi()?.write(&tx)
        }

        fn read_id(&self) -> Result<u8, AcquisitionError> {
            let mut tx = Command::Rreg { addr: addr::ID, count: 1 }
                .opcode()
                .map_err(AcquisitionError::Register)?;
            tx.push(0);
            let mut rx = vec![0u8; tx.len()];
            self.spi()?.transfer(&tx, &mut rx)?;
            Ok(rx[2])
        }

        fn wait_drdy(&mut self) -> Result<(), AcquisitionError> {
            let timeout = Duration::from_millis(u64::from(self.config.drdy_timeout_ms));
            let pin = self
                .drdy
                .as_mut()
                .ok_or_else(|| AcquisitionError::Backend("device not open".into()))?;
            let started = Instant::now();
            while pin.read()? {
                if started.elapsed() > timeout {
                    return Err(AcquisitionError::Backend("DRDY timeout".into()));
                }
                sleep(Duration::from_micros(50));
            }
            Ok(())
        }
    }

    impl DeviceBackend for HardwareBackend {
        fn kind(&self) -> BackendKind {
            BackendKind::Hardware
        }

        fn capabilities(&self) -> Capabilities {
            Capabilities {
                register_writes: true,
                mid_stream_rate_change: false,
                self_paced: true,
            }
        }

        fn open(&mut self, rf: &RegisterFile) -> Result<RegisterFile, AcquisitionError> {
            self.spi = Some(Spi::open(&self.config.spi_path, self.config.spi_speed_hz)?);
            self.drdy = Some(Pin::export(&self.config.gpio_root, self.config.drdy_pin, "in")?);
            if let Some(reset) = self.config.reset_pin {
                let mut pin = Pin::export(&self.config.gpio_root, reset, "out")?;
                pin.set(false)?;
                sleep(Duration::from_millis(1));
                pin.set(true)?;
            } else {
                self.command(Command::Reset)?;
            }
            // tPOR plus 18 tCLK after reset
            sleep(Duration::from_millis(150));
            self.command(Command::Sdatac)?;
            let id = self.read_id()?;
            if id != DEVICE_ID {
                return Err(AcquisitionError::BackendUnavailable(format!(
                    "device id {id:#04x}, expected {DEVICE_ID:#04x}"
                )));
            }
            // skip the read-only lead-off status pair
            self.write_range(rf, addr::CONFIG1, addr::LOFF_FLIP)?;
            self.write_range(rf, addr::GPIO, addr::CONFIG4)?;
            self.command(Command::Start)?;
            self.command(Command::Rdatac)?;
            Ok(*rf)
        }

        fn poll(&mut self) -> Result<Poll, AcquisitionError> {
            self.wait_drdy()?;
            let tx = [0u8; FRAME_LEN];
            let mut rx = [0u8; FRAME_LEN];
            self.spi()?.transfer(&tx, &mut rx)?;
            let frame = decode_frame(&rx).map_err(AcquisitionError::Register)?;
            Ok(Poll::Frame(frame))
        }

        fn write_register(&mut self, addr: u8, value: u8, _rf: &RegisterFile) -> Result<(), AcquisitionError> {
            self.command(Command::Sdatac)?;
            let mut tx = Command::Wreg { addr, count: 1 }
                .opcode()
                .map_err(AcquisitionError::Register)?;
            tx.push(value);
            self.spi()?.write(&tx)?;
            self.command(Command::Rdatac)
        }
    }

    impl Drop for HardwareBackend {
        fn drop(&mut self) {
            if self.spi.is_some() {
                let _ = self.command(Command::Sdatac);
                let _ = self.command(Command::Stop);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = HardwareConfig::from_toml("spi_path = \"/dev/spidev0.0\"\ndrdy_pin = 26\n").unwrap();
        assert_eq!(cfg.spi_speed_hz, 2_000_000);
        assert_eq!(cfg.reset_pin, None);
        assert_eq!(cfg.gpio_root, PathBuf::from("/sys/class/gpio"));
    }

    #[test]
    fn rejects_typos_and_bad_speeds() {
        assert!(HardwareConfig::from_toml("spi_path = \"/dev/spidev0.0\"\ndrdy_pn = 26\n").is_err());
        assert!(HardwareConfig::from_toml("spi_path = \"/dev/spidev0.0\"\ndrdy_pin = 26\nspi_speed_hz = 0\n").is_err());
        assert!(HardwareConfig::from_toml("spi_path = \"\"\ndrdy_pin = 26\n").is_err());
        assert!(HardwareConfig::from_toml("drdy_pin = -1").is_err());
    }
}
