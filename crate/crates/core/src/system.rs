//! Analytic end-to-end model: emitter → modulator → quantum channel → SPAD,
//! with the classical channel's leakage and Raman noise folded in.

use crate::bb84::qber_analytic;
use crate::detection::{classical_ber, expected_window_rates, PinTiaSpec, ReceiverWindow, SpadSpec, WindowRates};
use crate::emitter::{mu_at_modulator_output, EmitterSpec, TxBudget};
use crate::error::Error;
use crate::link::{
    leakage_noise_rate, path_loss_db, raman_noise_rate, Band, FiberSpec, RamanModel, WdmSpec,
};
use crate::spectrum::FlatTopFilter;
use crate::units::{db_to_transmission, PowerLevel, Wavelength};

/// Which physical link sits between the two WDM stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkConfig {
    BackToBack,
    Fiber,
}

impl LinkConfig {
    pub fn name(self) -> &'static str {
        match self {
            LinkConfig::BackToBack => "b2b",
            LinkConfig::Fiber => "fiber",
        }
    }
}

/// Every parameter of the joint quantum/classical testbed.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub emitter: EmitterSpec,
    pub drive_current_ma: f64,
    pub tx: TxBudget,
    /// Total quantum-path loss from modulator output to SPAD input, dB. The
    /// quantum budget is the same for back-to-back and fiber runs.
    pub quantum_rx_loss_db: f64,
    pub fiber: FiberSpec,
    pub wdm: WdmSpec,
    pub cleanup_filter: FlatTopFilter,
    pub classical_wavelength: Wavelength,
    pub raman: RamanModel,
    pub spad: SpadSpec,
    pub window: ReceiverWindow,
    /// Intrinsic optical error probability of the state preparation/analysis.
    pub e_opt: f64,
    /// Additive QBER from depolarization, zero unless configured.
    pub depolarization_qber: f64,
    pub classical_rx: PinTiaSpec,
}

impl Default for SystemModel {
    /// Testbed defaults with all calibrated quantities left at neutral values.
    fn default() -> Self {
        let lambda_q = Wavelength::from_nm(1550.12);
        let slice = FlatTopFilter::from_frequency_width(lambda_q, 200e9, 0.0, 40.0)
            .expect("default slicing filter");
        SystemModel {
            emitter: EmitterSpec::default(),
            drive_current_ma: 20.0,
            tx: TxBudget {
                slicing_filter: slice,
                modulator_insertion_loss_db: 0.0,
                symbol_rate: 1e8,
            },
            quantum_rx_loss_db: 0.0,
            fiber: FiberSpec::default(),
            wdm: WdmSpec::default(),
            cleanup_filter: slice,
            classical_wavelength: Wavelength::from_nm(852.0),
            raman: RamanModel::default(),
            spad: SpadSpec::default(),
            window: ReceiverWindow::default(),
            e_opt: 0.0,
            depolarization_qber: 0.0,
            classical_rx: PinTiaSpec {
                responsivity: 0.56,
                noise_current_rms: 1e-7,
            },
        }
    }
}

/// Everything the analytic model predicts at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEvaluation {
    /// Photons/symbol at the modulator output.
    pub mu: f64,
    /// Photons/symbol at the SPAD input.
    pub mu_arrival: f64,
    pub classical_rop: Option<PowerLevel>,
    pub classical_launch: Option<PowerLevel>,
    /// Photons/s at the SPAD input.
    pub leakage_photons: f64,
    /// Photons/s at the SPAD input.
    pub raman_photons: f64,
    pub rates: WindowRates,
    pub qber: f64,
    /// counts/s, after temporal filtering and dead time.
    pub raw_rate: f64,
    /// 0.5 without a classical signal.
    pub classical_ber: f64,
}

impl LinkEvaluation {
    /// Leakage click rate over the full time axis.
    pub fn leakage_clicks(&self, efficiency: f64) -> f64 {
        self.leakage_photons * efficiency
    }

    pub fn raman_clicks(&self, efficiency: f64) -> f64 {
        self.raman_photons * efficiency
    }
}

impl SystemModel {
    pub fn mu(&self) -> Result<f64, Error> {
        mu_at_modulator_output(&self.emitter, &self.tx, self.drive_current_ma)
    }

    pub fn fiber_for(&self, config: LinkConfig) -> FiberSpec {
        match config {
            LinkConfig::BackToBack => self.fiber.with_length(0.0),
            LinkConfig::Fiber => self.fiber,
        }
    }

    /// Classical loss from transmitter launch to receiver input, dB.
    pub fn classical_path_loss_db(&self, config: LinkConfig) -> f64 {
        path_loss_db(
            &self.fiber_for(config),
            &self.wdm,
            &self.cleanup_filter,
            Band::Classical,
        )
    }

    /// Launch power that produces `rop` at the classical receiver.
    pub fn launch_for_rop(&self, config: LinkConfig, rop: PowerLevel) -> PowerLevel {
        rop.attenuate_db(-self.classical_path_loss_db(config))
    }

    /// Evaluates the link with the classical channel off (`None`) or at a
    /// given received optical power.
    pub fn evaluate(
        &self,
        config: LinkConfig,
        classical_rop: Option<PowerLevel>,
    ) -> Result<LinkEvaluation, Error> {
        let mu = self.mu()?;
        let mu_arrival = mu * db_to_transmission(self.quantum_rx_loss_db);
        let fiber = self.fiber_for(config);
        let (launch, leakage, raman) = match classical_rop {
            Some(rop) => {
                let launch = self.launch_for_rop(config, rop);
                let leakage = leakage_noise_rate(
                    &self.wdm,
                    rop,
                    &self.cleanup_filter,
                    self.classical_wavelength,
                );
                let bandwidth_nm = self.cleanup_filter.passband_width() * 1e9;
                let raman = raman_noise_rate(&self.raman, launch, &fiber, bandwidth_nm);
                (Some(launch), leakage, raman)
            }
            None => (None, 0.0, 0.0),
        };
        let noise_clicks = (leakage + raman) * self.spad.efficiency;
        let rates = expected_window_rates(
            mu_arrival,
            &self.spad,
            self.tx.symbol_rate,
            &self.window,
            noise_clicks,
        )?;
        let qber = (qber_analytic(rates.signal, rates.dark, rates.noise, self.e_opt)?
            + self.depolarization_qber)
            .min(0.5);
        let classical_ber = match classical_rop {
            Some(rop) => classical_ber(&self.classical_rx, rop),
            None => 0.5,
        };
        Ok(LinkEvaluation {
            mu,
            mu_arrival,
            classical_rop,
            classical_launch: launch,
            leakage_photons: leakage,
            raman_photons: raman,
            rates,
            qber,
            raw_rate: rates.observed_total(),
            classical_ber,
        })
    }
}
