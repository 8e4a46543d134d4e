use std::fmt;

use crate::error::Ads1299Error;
use crate::CHANNELS;

/// Register addresses.
pub mod addr {
    pub const ID: u8 = 0x00;
    pub const CONFIG1: u8 = 0x01;
    pub const CONFIG2: u8 = 0x02;
    pub const CONFIG3: u8 = 0x03;
    pub const LOFF: u8 = 0x04;
    pub const CH1SET: u8 = 0x05;
    pub const CH8SET: u8 = 0x0C;
    pub const BIAS_SENSP: u8 = 0x0D;
    pub const BIAS_SENSN: u8 = 0x0E;
    pub const LOFF_SENSP: u8 = 0x0F;
    pub const LOFF_SENSN: u8 = 0x10;
    pub const LOFF_FLIP: u8 = 0x11;
    pub const LOFF_STATP: u8 = 0x12;
    pub const LOFF_STATN: u8 = 0x13;
    pub const GPIO: u8 = 0x14;
    pub const MISC1: u8 = 0x15;
    pub const MISC2: u8 = 0x16;
    pub const CONFIG4: u8 = 0x17;

    /// Address of the CHnSET register for a zero-based channel index.
    pub const fn chset(channel: usize) -> u8 {
        CH1SET + channel as u8
    }
}

/// Number of registers in the contiguous map `0x00..=0x17`.
pub const REGISTER_COUNT: usize = 0x18;

/// ID register contents of an 8-channel ADS1299 (REV_ID 001, DEV_ID 11, NU_CH 10).
pub const DEVICE_ID: u8 = 0x3E;

const GAIN_SHIFT: u8 = 4;
const GAIN_MASK: u8 = 0x70;
const POWER_DOWN: u8 = 0x80;
const MUX_MASK: u8 = 0x07;
const DR_MASK: u8 = 0x07;

#[derive(Clone, Copy)]
struct RegisterDef {
    name: &'static str,
    reset: u8,
    read_only: bool,
    /// Bits that are reserved and must hold `fixed_value`.
    fixed_mask: u8,
    fixed_value: u8,
    /// Status bits inside an otherwise writable register; writes leave them untouched.
    status_mask: u8,
}

const fn rw(name: &'static str, reset: u8, fixed_mask: u8, fixed_value: u8) -> RegisterDef {
    RegisterDef {
        name,
        reset,
        read_only: false,
        fixed_mask,
        fixed_value,
        status_mask: 0,
    }
}

const fn ro(name: &'static str, reset: u8) -> RegisterDef {
    RegisterDef {
        name,
        reset,
        read_only: true,
        fixed_mask: 0,
        fixed_value: 0,
        status_mask: 0xFF,
    }
}

const CHSET: RegisterDef = rw("CHnSET", 0x61, 0x00, 0x00);

const MAP: [RegisterDef; REGISTER_COUNT] = [
    ro("ID", DEVICE_ID),
    rw("CONFIG1", 0x96, 0x98, 0x90),
    rw("CONFIG2", 0xC0, 0xE8, 0xC0),
    RegisterDef {
        status_mask: 0x01,
        ..rw("CONFIG3", 0x60, 0x60, 0x60)
    },
    rw("LOFF", 0x00, 0x10, 0x00),
    RegisterDef { name: "CH1SET", ..CHSET },
    RegisterDef { name: "CH2SET", ..CHSET },
    RegisterDef { name: "CH3SET", ..CHSET },
    RegisterDef { name: "CH4SET", ..CHSET },
    RegisterDef { name: "CH5SET", ..CHSET },
    RegisterDef { name: "CH6SET", ..CHSET },
    RegisterDef { name: "CH7SET", ..CHSET },
    RegisterDef { name: "CH8SET", ..CHSET },
    rw("BIAS_SENSP", 0x00, 0x00, 0x00),
    rw("BIAS_SENSN", 0x00, 0x00, 0x00),
    rw("LOFF_SENSP", 0x00, 0x00, 0x00),
    rw("LOFF_SENSN", 0x00, 0x00, 0x00),
    rw("LOFF_FLIP", 0x00, 0x00, 0x00),
    ro("LOFF_STATP", 0x00),
    ro("LOFF_STATN", 0x00),
    rw("GPIO", 0x0F, 0x00, 0x00),
    rw("MISC1", 0x00, 0xDF, 0x00),
    rw("MISC2", 0x00, 0xFF, 0x00),
    rw("CONFIG4", 0x00, 0xF5, 0x00),
];

/// Programmable gain of a channel's input amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gain {
    X1,
    X2,
    X4,
    X6,
    X8,
    X12,
    X24,
}

impl Gain {
    pub const ALL: [Gain; 7] = [
        Gain::X1,
        Gain::X2,
        Gain::X4,
        Gain::X6,
        Gain::X8,
        Gain::X12,
        Gain::X24,
    ];

    pub fn value(self) -> u32 {
        match self {
            Gain::X1 => 1,
            Gain::X2 => 2,
            Gain::X4 => 4,
            Gain::X6 => 6,
            Gain::X8 => 8,
            Gain::X12 => 12,
            Gain::X24 => 24,
        }
    }

    pub fn from_value(value: u32) -> Result<Self, Ads1299Error> {
        Gain::ALL
            .into_iter()
            .find(|g| g.value() == value)
            .ok_or(Ads1299Error::UnsupportedGain(value))
    }

    /// Decodes the 3-bit GAIN field of a CHnSET register.
    pub fn from_field(bits: u8) -> Option<Self> {
        Gain::ALL.get(bits as usize).copied()
    }

    pub fn field(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.value())
    }
}

/// Output data rate selected by the CONFIG1 DR field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataRate {
    Sps16000,
    Sps8000,
    Sps4000,
    Sps2000,
    Sps1000,
    Sps500,
    Sps250,
}

impl DataRate {
    pub const ALL: [DataRate; 7] = [
        DataRate::Sps16000,
        DataRate::Sps8000,
        DataRate::Sps4000,
        DataRate::Sps2000,
        DataRate::Sps1000,
        DataRate::Sps500,
        DataRate::Sps250,
    ];

    pub fn samples_per_second(self) -> u32 {
        16_000 >> (self as u32)
    }

    pub fn from_sps(sps: u32) -> Result<Self, Ads1299Error> {
        DataRate::ALL
            .into_iter()
            .find(|r| r.samples_per_second() == sps)
            .ok_or(Ads1299Error::UnsupportedDataRate(sps))
    }

    pub fn from_field(bits: u8) -> Option<Self> {
        DataRate::ALL.get(bits as usize).copied()
    }

    pub fn field(self) -> u8 {
        self as u8
    }
}

/// Channel input multiplexer setting (CHnSET bits 2:0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputMux {
    Normal,
    Shorted,
    BiasMeasure,
    Supply,
    Temperature,
    TestSignal,
    BiasPositive,
    BiasNegative,
}

impl InputMux {
    pub fn from_field(bits: u8) -> Self {
        match bits & MUX_MASK {
            0 => InputMux::Normal,
            1 => InputMux::Shorted,
            2 => InputMux::BiasMeasure,
            3 => InputMux::Supply,
            4 => InputMux::Temperature,
            5 => InputMux::TestSignal,
            6 => InputMux::BiasPositive,
            _ => InputMux::BiasNegative,
        }
    }

    pub fn field(self) -> u8 {
        self as u8
    }
}

/// Value-semantics model of the converter's register bank.
///
/// Every write goes through [`RegisterFile::write_register`], which rejects
/// unknown addresses, read-only registers, reserved-bit violations and the
/// "do not use" encodings of the gain and data-rate fields. A bank that was
/// only ever modified through it therefore always decodes to a valid gain
/// per channel and a valid data rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegisterFile {
    regs: [u8; REGISTER_COUNT],
}

impl Default for RegisterFile {
    /// Kit operating configuration: 250 SPS, gain 24 and normal electrode input
    /// on all channels, internal reference buffer enabled.
    fn default() -> Self {
        let mut rf = Self::power_on();
        rf.regs[addr::CONFIG1 as usize] = 0x90 | DataRate::Sps250.field();
        rf.regs[addr::CONFIG3 as usize] = 0xE0;
        for ch in 0..CHANNELS {
            rf.regs[addr::chset(ch) as usize] = (Gain::X24.field() << GAIN_SHIFT) | InputMux::Normal.field();
        }
        rf
    }
}

impl RegisterFile {
    /// Register contents immediately after a device reset.
    pub fn power_on() -> Self {
        let mut regs = [0u8; REGISTER_COUNT];
        for (slot, def) in regs.iter_mut().zip(MAP.iter()) {
            *slot = def.reset;
        }
        Self { regs }
    }

    /// Builds a bank from a full register dump, validating every writable register.
    pub fn from_bytes(bytes: [u8; REGISTER_COUNT]) -> Result<Self, Ads1299Error> {
        let mut rf = Self::power_on();
        rf.regs[addr::ID as usize] = bytes[addr::ID as usize];
        rf.regs[addr::LOFF_STATP as usize] = bytes[addr::LOFF_STATP as usize];
        rf.regs[addr::LOFF_STATN as usize] = bytes[addr::LOFF_STATN as usize];
        for (a, &value) in bytes.iter().enumerate() {
            if !MAP[a].read_only {
                rf = rf.write_register(a as u8, value)?;
                let status = MAP[a].status_mask;
                rf.regs[a] = (rf.regs[a] & !status) | (value & status);
            }
        }
        Ok(rf)
    }

    pub fn as_bytes(&self) -> &[u8; REGISTER_COUNT] {
        &self.regs
    }

    pub fn read_register(&self, address: u8) -> Result<u8, Ads1299Error> {
        self.regs
            .get(address as usize)
            .copied()
            .ok_or(Ads1299Error::UnknownRegister(address))
    }

    /// Returns the bank with `value` written to `address`.
    pub fn write_register(mut self, address: u8, value: u8) -> Result<Self, Ads1299Error> {
        let def = MAP
            .get(address as usize)
            .ok_or(Ads1299Error::UnknownRegister(address))?;
        if def.read_only {
            return Err(Ads1299Error::ReadOnlyRegister(address));
        }
        let invalid = |reason| Ads1299Error::InvalidFieldEncoding {
            addr: address,
            value,
            reason,
        };
        if value & def.fixed_mask != def.fixed_value {
            return Err(invalid("reserved bits must keep their fixed pattern"));
        }
        match address {
            addr::CONFIG1 if DataRate::from_field(value & DR_MASK).is_none() => {
                return Err(invalid("data-rate field 0b111 is not a valid rate"));
            }
            addr::CONFIG2 if value & 0x03 == 0x02 => {
                return Err(invalid("test-signal frequency field 0b10 is not used"));
            }
            a if (addr::CH1SET..=addr::CH8SET).contains(&a)
                && Gain::from_field((value & GAIN_MASK) >> GAIN_SHIFT).is_none() =>
            {
                return Err(invalid("gain field 0b111 is not a valid gain"));
            }
            _ => {}
        }
        let slot = &mut self.regs[address as usize];
        *slot = (*slot & def.status_mask) | (value & !def.status_mask);
        Ok(self)
    }

    pub fn register_name(address: u8) -> Option<&'static str> {
        MAP.get(address as usize).map(|d| d.name)
    }

    pub fn is_read_only(address: u8) -> Option<bool> {
        MAP.get(address as usize).map(|d| d.read_only)
    }

    pub fn id(&self) -> u8 {
        self.regs[addr::ID as usize]
    }

    pub fn config1(&self) -> u8 {
        self.regs[addr::CONFIG1 as usize]
    }

    pub fn config2(&self) -> u8 {
        self.regs[addr::CONFIG2 as usize]
    }

    pub fn config3(&self) -> u8 {
        self.regs[addr::CONFIG3 as usize]
    }

    pub fn chset(&self, channel: usize) -> u8 {
        self.regs[addr::chset(channel) as usize]
    }

    pub fn loff(&self) -> u8 {
        self.regs[addr::LOFF as usize]
    }

    pub fn bias_sensp(&self) -> u8 {
        self.regs[addr::BIAS_SENSP as usize]
    }

    pub fn bias_sensn(&self) -> u8 {
        self.regs[addr::BIAS_SENSN as usize]
    }

    pub fn misc1(&self) -> u8 {
        self.regs[addr::MISC1 as usize]
    }

    pub fn gpio(&self) -> u8 {
        self.regs[addr::GPIO as usize]
    }

    pub fn data_rate(&self) -> DataRate {
        // write_register never stores the invalid 0b111 encoding
        DataRate::from_field(self.config1() & DR_MASK).unwrap_or(DataRate::Sps250)
    }

    pub fn sample_rate(&self) -> u32 {
        self.data_rate().samples_per_second()
    }

    /// # Panics
    /// If `channel >= 8`.
    pub fn gain_of(&self, channel: usize) -> Gain {
        Gain::from_field((self.chset(channel) & GAIN_MASK) >> GAIN_SHIFT).unwrap_or(Gain::X24)
    }

    pub fn gains(&self) -> [Gain; CHANNELS] {
        std::array::from_fn(|ch| self.gain_of(ch))
    }

    pub fn is_powered_down(&self, channel: usize) -> bool {
        self.chset(channel) & POWER_DOWN != 0
    }

    pub fn input_mux(&self, channel: usize) -> InputMux {
        InputMux::from_field(self.chset(channel))
    }

    /// CONFIG1 value selecting `rate`, preserving the other bits.
    pub fn config1_with_rate(&self, rate: DataRate) -> u8 {
        (self.config1() & !DR_MASK) | rate.field()
    }

    /// CHnSET value selecting `gain` on `channel`, preserving the other bits.
    pub fn chset_with_gain(&self, channel: usize, gain: Gain) -> u8 {
        (self.chset(channel) & !GAIN_MASK) | (gain.field() << GAIN_SHIFT)
    }

    /// Convenience wrapper writing the gain field of one channel.
    pub fn with_gain(self, channel: usize, gain: Gain) -> Result<Self, Ads1299Error> {
        if channel >= CHANNELS {
            return Err(Ads1299Error::UnknownRegister(addr::CH1SET + channel as u8));
        }
        let value = self.chset_with_gain(channel, gain);
        self.write_register(addr::chset(channel), value)
    }

    pub fn with_data_rate(self, rate: DataRate) -> Result<Self, Ads1299Error> {
        let value = self.config1_with_rate(rate);
        self.write_register(addr::CONFIG1, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_field_table() {
        let expected = [1, 2, 4, 6, 8, 12, 24];
        for (bits, want) in expected.iter().enumerate() {
            assert_eq!(Gain::from_field(bits as u8).unwrap().value(), *want);
        }
        assert!(Gain::from_field(7).is_none());
    }

    #[test]
    fn data_rate_field_table() {
        let expected = [16000, 8000, 4000, 2000, 1000, 500, 250];
        for (bits, want) in expected.iter().enumerate() {
            assert_eq!(DataRate::from_field(bits as u8).unwrap().samples_per_second(), *want);
        }
        assert!(DataRate::from_field(7).is_none());
    }

    #[test]
    fn write_gain_24_on_channel_0() {
        let rf = RegisterFile::power_on().write_register(addr::CH1SET, 0x60).unwrap();
        assert_eq!(rf.gain_of(0), Gain::X24);
        let rf = rf.write_register(addr::CH1SET, 0x10).unwrap();
        assert_eq!(rf.gain_of(0), Gain::X2);
    }

    #[test]
    fn id_is_read_only() {
        let err = RegisterFile::default().write_register(addr::ID, 0x00).unwrap_err();
        assert_eq!(err, Ads1299Error::ReadOnlyRegister(addr::ID));
        let err = RegisterFile::default().write_register(addr::LOFF_STATP, 0x00).unwrap_err();
        assert_eq!(err, Ads1299Error::ReadOnlyRegister(addr::LOFF_STATP));
    }

    #[test]
    fn config1_250_sps() {
        let rf = RegisterFile::power_on()
            .write_register(addr::CONFIG1, 0x90)
            .unwrap();
        assert_eq!(rf.sample_rate(), 16000);
        let rf = rf.write_register(addr::CONFIG1, 0x96).unwrap();
        assert_eq!(rf.sample_rate(), 250);
    }

    #[test]
    fn invalid_encodings_rejected() {
        let rf = RegisterFile::default();
        assert!(matches!(
            rf.write_register(addr::CONFIG1, 0x97),
            Err(Ads1299Error::InvalidFieldEncoding { .. })
        ));
        assert!(matches!(
            rf.write_register(addr::CH1SET + 3, 0x70),
            Err(Ads1299Error::InvalidFieldEncoding { .. })
        ));
        // CONFIG1 bits 4:3 must read 0b10
        assert!(matches!(
            rf.write_register(addr::CONFIG1, 0x86),
            Err(Ads1299Error::InvalidFieldEncoding { .. })
        ));
        assert!(matches!(
            rf.write_register(addr::MISC2, 0x01),
            Err(Ads1299Error::InvalidFieldEncoding { .. })
        ));
    }

    #[test]
    fn unmapped_addresses() {
        let rf = RegisterFile::default();
        assert_eq!(rf.read_register(0x18), Err(Ads1299Error::UnknownRegister(0x18)));
        assert_eq!(rf.write_register(0x1F, 0).unwrap_err(), Ads1299Error::UnknownRegister(0x1F));
        for a in 0..REGISTER_COUNT as u8 {
            assert!(rf.read_register(a).is_ok());
        }
    }

    #[test]
    fn status_bit_in_config3_is_preserved() {
        let mut bytes = *RegisterFile::default().as_bytes();
        bytes[addr::CONFIG3 as usize] = 0xE1;
        let rf = RegisterFile::from_bytes(bytes).unwrap();
        assert_eq!(rf.config3(), 0xE1);
        let rf = rf.write_register(addr::CONFIG3, 0xE0).unwrap();
        assert_eq!(rf.config3(), 0xE1);
    }

    #[test]
    fn default_matches_kit_configuration() {
        let rf = RegisterFile::default();
        assert_eq!(rf.id(), DEVICE_ID);
        assert_eq!(rf.sample_rate(), 250);
        for ch in 0..CHANNELS {
            assert_eq!(rf.gain_of(ch), Gain::X24);
            assert_eq!(rf.input_mux(ch), InputMux::Normal);
            assert!(!rf.is_powered_down(ch));
        }
    }

    #[test]
    fn helpers_round_trip() {
        let rf = RegisterFile::default()
            .with_gain(5, Gain::X6)
            .unwrap()
            .with_data_rate(DataRate::Sps1000)
            .unwrap();
        assert_eq!(rf.gain_of(5), Gain::X6);
        assert_eq!(rf.gain_of(4), Gain::X24);
        assert_eq!(rf.sample_rate(), 1000);
        assert_eq!(RegisterFile::from_bytes(*rf.as_bytes()).unwrap(), rf);
    }
}
