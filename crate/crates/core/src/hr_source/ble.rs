//! BLE GATT heart-rate client.
//!
//! The platform radio sits behind [`BleCentral`] / [`GattLink`]; everything
//! above that (service filtering, notify-or-poll, receipt timestamps,
//! connection-loss reporting) lives here. This build ships no platform
//! backend, so [`default_central`] reports [`SourceError::AdapterUnavailable`].

use std::fmt;
use std::sync::atomic::Ordering;
use std::time::{Duration, Instant};

use log::warn;

use super::{
    parse_hr_measurement, sleep_until, HeartRateSample, HrStream, SensorConfig, SourceError,
};

/// Environment variable naming the BLE adapter to use.
pub const ADAPTER_ENV: &str = "HEARTWARP_BLE_ADAPTER";

pub const DEFAULT_SCAN_TIMEOUT: Duration = Duration::from_secs(10);

const NOTIFY_WAIT: Duration = Duration::from_millis(200);

/// 128-bit Bluetooth UUID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BleUuid(pub u128);

impl BleUuid {
    const BASE: u128 = 0x0000_0000_0000_1000_8000_0080_5F9B_34FB;

    /// Expand a 16-bit SIG-assigned UUID onto the Bluetooth base UUID.
    pub const fn from_u16(short: u16) -> Self {
        Self(Self::BASE | ((short as u128) << 96))
    }
}

impl fmt::Display for BleUuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        write!(
            f,
            "{:08x}-{:04x}-{:04x}-{:04x}-{:012x}",
            (v >> 96) as u32,
            (v >> 80) as u16,
            (v >> 64) as u16,
            (v >> 48) as u16,
            v & 0xFFFF_FFFF_FFFF
        )
    }
}

pub const HEART_RATE_SERVICE: BleUuid = BleUuid::from_u16(0x180D);
pub const HEART_RATE_MEASUREMENT: BleUuid = BleUuid::from_u16(0x2A37);

/// Raw advertisement as reported by a scanner.
#[derive(Debug, Clone, PartialEq)]
pub struct Advertisement {
    pub address: String,
    pub local_name: Option<String>,
    pub services: Vec<BleUuid>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveredDevice {
    pub name: String,
    pub address: String,
}

pub trait BleCentral: Send {
    fn scan(&mut self, timeout: Duration) -> Result<Vec<Advertisement>, SourceError>;
    fn connect(&mut self, address: &str) -> Result<Box<dyn GattLink>, SourceError>;
}

/// A connected peripheral.
pub trait GattLink: Send {
    fn supports_notify(&self, service: BleUuid, characteristic: BleUuid) -> bool;
    fn subscribe(&mut self, service: BleUuid, characteristic: BleUuid) -> Result<(), SourceError>;
    /// Wait up to `timeout` for the next notification; `Ok(None)` on timeout.
    fn next_notification(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, SourceError>;
    fn read(&mut self, service: BleUuid, characteristic: BleUuid) -> Result<Vec<u8>, SourceError>;
}

/// The platform central for `adapter` (or the system default).
pub fn default_central(adapter: Option<&str>) -> Result<Box<dyn BleCentral>, SourceError> {
    let which = adapter.unwrap_or("default");
    Err(SourceError::AdapterUnavailable(format!(
        "no BLE backend compiled into this build (adapter `{which}`)"
    )))
}

/// Devices advertising the Heart Rate Service, deduplicated by address in
/// first-seen order.
pub fn scan_heart_rate_devices(
    central: &mut dyn BleCentral,
    timeout: Duration,
) -> Result<Vec<DiscoveredDevice>, SourceError> {
    let mut out: Vec<DiscoveredDevice> = Vec::new();
    for adv in central.scan(timeout)? {
        if !adv.services.contains(&HEART_RATE_SERVICE) {
            continue;
        }
        if out.iter().any(|d| d.address == adv.address) {
            continue;
        }
        out.push(DiscoveredDevice {
            name: adv.local_name.unwrap_or_else(|| "(unknown)".into()),
            address: adv.address,
        });
    }
    Ok(out)
}

/// Connect to `config.address_or_path` and stream its heart rate.
///
/// Notifications are used when the characteristic supports them; otherwise
/// the characteristic is polled at `query_rate_hz`. Timestamps are seconds
/// since the stream opened, taken at receipt from a monotonic clock.
/// Readings that fail to parse are dropped with a warning; a link failure
/// ends the stream with [`SourceError::ConnectionLost`].
pub fn open_ble_stream(
    mut central: Box<dyn BleCentral>,
    config: &SensorConfig,
) -> Result<HrStream, SourceError> {
    config.validate()?;
    let mut link = central.connect(&config.address_or_path)?;
    let notify = link.supports_notify(HEART_RATE_SERVICE, HEART_RATE_MEASUREMENT);
    if notify {
        link.subscribe(HEART_RATE_SERVICE, HEART_RATE_MEASUREMENT)?;
    }
    let poll_period = Duration::from_secs_f64(1.0 / config.query_rate_hz);

    Ok(HrStream::spawn(move |tx, stop| {
        let _central = central;
        let epoch = Instant::now();
        let mut last_t = f64::NEG_INFINITY;
        let mut next_poll = epoch;
        while !stop.load(Ordering::Relaxed) {
            let payload = if notify {
                link.next_notification(NOTIFY_WAIT)
            } else {
                if !sleep_until(next_poll, &stop) {
                    return;
                }
                next_poll += poll_period;
                link.read(HEART_RATE_SERVICE, HEART_RATE_MEASUREMENT)
                    .map(Some)
            };
            let payload = match payload {
                Ok(Some(p)) => p,
                Ok(None) => continue,
                Err(e) => {
                    let _ = tx.send(Err(SourceError::ConnectionLost(e.to_string())));
                    return;
                }
            };
            // Receipt time; nudged forward if the clock did not advance.
            let t = epoch.elapsed().as_secs_f64().max(last_t + 1e-9);
            match parse_hr_measurement(&payload) {
                Ok(m) => {
                    last_t = t;
                    let sample = HeartRateSample {
                        t,
                        bpm: f64::from(m.bpm),
                        rr_intervals: m.rr_intervals,
                    };
                    if tx.send(Ok(sample)).is_err() {
                        return;
                    }
                }
                Err(e) => warn!("dropping heart rate reading: {e}"),
            }
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn uuid_expansion() {
        assert_eq!(
            HEART_RATE_SERVICE.to_string(),
            "0000180d-0000-1000-8000-00805f9b34fb"
        );
        assert_eq!(
            HEART_RATE_MEASUREMENT.to_string(),
            "00002a37-0000-1000-8000-00805f9b34fb"
        );
    }

    struct FakeCentral {
        ads: Vec<Advertisement>,
        link: Option<FakeLink>,
    }

    impl BleCentral for FakeCentral {
        fn scan(&mut self, _timeout: Duration) -> Result<Vec<Advertisement>, SourceError> {
            Ok(self.ads.clone())
        }

        fn connect(&mut self, address: &str) -> Result<Box<dyn GattLink>, SourceError> {
            match self.link.take() {
                Some(l) if address == "AA:BB" => Ok(Box::new(l)),
                _ => Err(SourceError::DeviceNotFound(address.into())),
            }
        }
    }

    struct FakeLink {
        notify: bool,
        payloads: VecDeque<Vec<u8>>,
        subscribed: bool,
    }

    impl GattLink for FakeLink {
        fn supports_notify(&self, _s: BleUuid, c: BleUuid) -> bool {
            self.notify && c == HEART_RATE_MEASUREMENT
        }

        fn subscribe(&mut self, _s: BleUuid, _c: BleUuid) -> Result<(), SourceError> {
            self.subscribed = true;
            Ok(())
        }

        fn next_notification(&mut self, _t: Duration) -> Result<Option<Vec<u8>>, SourceError> {
            assert!(self.subscribed);
            self.payloads
                .pop_front()
                .map(Some)
                .ok_or_else(|| SourceError::ConnectionLost("peer disconnected".into()))
        }

        fn read(&mut self, _s: BleUuid, _c: BleUuid) -> Result<Vec<u8>, SourceError> {
            self.payloads
                .pop_front()
                .ok_or_else(|| SourceError::ConnectionLost("peer disconnected".into()))
        }
    }

    fn central(notify: bool) -> Box<FakeCentral> {
        Box::new(FakeCentral {
            ads: vec![],
            link: Some(FakeLink {
                notify,
                subscribed: false,
                payloads: VecDeque::from(vec![
                    vec![0x00, 70],
                    vec![0x01, 0x48, 0x01], // 328 bpm, dropped
                    vec![0x10, 72, 0x00, 0x04],
                ]),
            }),
        })
    }

    fn collect(stream: HrStream) -> Vec<Result<HeartRateSample, SourceError>> {
        stream.collect()
    }

    #[test]
    fn notifications_are_parsed_and_loss_is_reported() {
        let items = collect(open_ble_stream(central(true), &SensorConfig::ble("AA:BB")).unwrap());
        assert_eq!(items.len(), 3);
        let a = items[0].as_ref().unwrap();
        let b = items[1].as_ref().unwrap();
        assert_eq!(a.bpm, 70.0);
        assert_eq!(b.bpm, 72.0);
        assert_eq!(b.rr_intervals, vec![1.0]);
        assert!(b.t > a.t && a.t >= 0.0);
        assert!(matches!(items[2], Err(SourceError::ConnectionLost(_))));
    }

    #[test]
    fn polling_fallback() {
        let mut cfg = SensorConfig::ble("AA:BB");
        cfg.query_rate_hz = 500.0;
        let items = collect(open_ble_stream(central(false), &cfg).unwrap());
        let bpms: Vec<f64> = items
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|s| s.bpm)
            .collect();
        assert_eq!(bpms, vec![70.0, 72.0]);
        assert!(matches!(
            items.last(),
            Some(Err(SourceError::ConnectionLost(_)))
        ));
    }

    #[test]
    fn unknown_device() {
        let err = open_ble_stream(central(true), &SensorConfig::ble("CC:DD"))
            .err()
            .unwrap();
        assert!(matches!(err, SourceError::DeviceNotFound(_)));
    }

    #[test]
    fn scan_filters_heart_rate_service() {
        let mut c = FakeCentral {
            link: None,
            ads: vec![
                Advertisement {
                    address: "11:22".into(),
                    local_name: Some("Polar Sense 1234".into()),
                    services: vec![BleUuid::from_u16(0x180F), HEART_RATE_SERVICE],
                },
                Advertisement {
                    address: "33:44".into(),
                    local_name: Some("Speaker".into()),
                    services: vec![BleUuid::from_u16(0x110B)],
                },
                Advertisement {
                    address: "11:22".into(),
                    local_name: Some("Polar Sense 1234".into()),
                    services: vec![HEART_RATE_SERVICE],
                },
            ],
        };
        let found = scan_heart_rate_devices(&mut c, DEFAULT_SCAN_TIMEOUT).unwrap();
        assert_eq!(
            found,
            vec![DiscoveredDevice {
                name: "Polar Sense 1234".into(),
                address: "11:22".into()
            }]
        );
        c.ads.clear();
        assert!(scan_heart_rate_devices(&mut c, DEFAULT_SCAN_TIMEOUT)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn no_backend_means_adapter_unavailable() {
        assert!(matches!(
            default_central(None),
            Err(SourceError::AdapterUnavailable(_))
        ));
    }
}
