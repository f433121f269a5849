//! Token wallets, regulator transactions and the daily price rule.
//!
//! The regulator is the only counterparty. A driver whose balance falls
//! short of the toll buys the deficit; otherwise the toll is paid and the
//! surplus sold. Transit riders sell their whole balance. In every case the
//! wallet is emptied at the transaction minute and refills at rate `r` up to
//! the full wallet `r * L`.

use serde::{Deserialize, Serialize};

use super::config::MarketConfig;

/// One traveler's token account.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenWallet {
    /// Tokens held at `last_update`.
    pub balance: f64,
    /// Continuous clock minute of the last transaction (`day * horizon + minute`).
    pub last_update: f64,
}

impl TokenWallet {
    pub fn full(full_wallet: f64) -> Self {
        Self { balance: full_wallet, last_update: 0.0 }
    }
}

/// Regulator-side market state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    /// Current token price p ($/token).
    pub price: f64,
    /// Net revenue of the most recently settled day K ($).
    pub net_revenue: f64,
    pub price_step: f64,
    pub revenue_threshold: f64,
    pub allocation_rate: f64,
    pub token_lifetime: f64,
    /// A disabled market keeps a zero price.
    pub enabled: bool,
}

impl MarketState {
    pub fn from_config(config: &MarketConfig) -> Self {
        Self {
            price: if config.enabled { config.initial_price } else { 0.0 },
            net_revenue: 0.0,
            price_step: config.price_step,
            revenue_threshold: config.revenue_threshold,
            allocation_rate: config.allocation_rate,
            token_lifetime: config.token_lifetime,
            enabled: config.enabled,
        }
    }

    pub fn full_wallet(&self) -> f64 {
        self.allocation_rate * self.token_lifetime
    }
}

/// Balance the wallet will hold at clock minute `t`, saturating at the full wallet.
#[inline]
pub fn expected_token_balance(wallet: &TokenWallet, t: f64, market: &MarketState) -> f64 {
    debug_assert!(t >= wallet.last_update, "forecast before last wallet update");
    let accrued = wallet.balance + market.allocation_rate * (t - wallet.last_update);
    accrued.min(market.full_wallet())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransactionKind {
    Buy,
    Sell,
}

/// One trade with the regulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub traveler: usize,
    /// Continuous clock minute of the trade.
    pub clock: f64,
    pub kind: TransactionKind,
    pub tokens: f64,
    /// Token amount times price; always non-negative.
    pub dollars: f64,
}

impl Transaction {
    /// Contribution to regulator net revenue.
    pub fn revenue(&self) -> f64 {
        match self.kind {
            TransactionKind::Buy => self.dollars,
            TransactionKind::Sell => -self.dollars,
        }
    }
}

/// What a traveler does with their tokens on a given day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TokenUse {
    /// Drive at clock minute `clock`, owing `toll` tokens.
    Drive { clock: f64, toll: f64 },
    /// Ride transit departing at clock minute `clock`.
    Transit { clock: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settlement {
    pub transactions: Vec<Transaction>,
    /// Σ buys − Σ sells ($).
    pub net_revenue: f64,
    /// Realized token cost per traveler ($, negative when selling).
    pub token_cost: Vec<f64>,
    /// Balance each traveler held at their transaction minute.
    pub balance_at_use: Vec<f64>,
}

/// Executes every traveler's trades for one day and empties their wallets.
pub fn settle_market(uses: &[TokenUse], wallets: &mut [TokenWallet], market: &MarketState) -> Settlement {
    assert_eq!(uses.len(), wallets.len(), "one token use per wallet");
    let price = market.price;
    let mut settlement = Settlement {
        transactions: Vec::with_capacity(uses.len()),
        net_revenue: 0.0,
        token_cost: Vec::with_capacity(uses.len()),
        balance_at_use: Vec::with_capacity(uses.len()),
    };
    for (traveler, (usage, wallet)) in uses.iter().zip(wallets.iter_mut()).enumerate() {
        let (clock, toll) = match *usage {
            TokenUse::Drive { clock, toll } => (clock, toll),
            TokenUse::Transit { clock } => (clock, 0.0),
        };
        let balance = expected_token_balance(wallet, clock, market);
        let (kind, tokens) = if balance < toll {
            (TransactionKind::Buy, toll - balance)
        } else {
            (TransactionKind::Sell, balance - toll)
        };
        let tx = Transaction { traveler, clock, kind, tokens, dollars: tokens * price };
        settlement.net_revenue += tx.revenue();
        settlement.token_cost.push(tx.revenue());
        settlement.balance_at_use.push(balance);
        if tokens > 0.0 {
            settlement.transactions.push(tx);
        }
        *wallet = TokenWallet { balance: 0.0, last_update: clock };
    }
    settlement
}

/// Dead-band price rule with a floor at zero.
pub fn adjust_price(market: &MarketState, net_revenue: f64) -> MarketState {
    let mut next = market.clone();
    next.net_revenue = net_revenue;
    if !market.enabled {
        return next;
    }
    if net_revenue > market.revenue_threshold {
        next.price = market.price + market.price_step;
    } else if net_revenue < -market.revenue_threshold {
        next.price = (market.price - market.price_step).max(0.0);
    }
    next
}
