/** Sample payloads mirroring real service responses, used across suites. */

export function sampleStats() {
  return {
    n_sim: 2000,
    sale_probability: 0.71,
    unsold: 580,
    overall_prices: {
      n: 1420,
      mean: 8.84,
      median: 8.42,
      sd: 3.1,
      iqr: [6.3, 11.4] as [number, number],
    },
    rounds: [
      {
        round_index: 1,
        sales: 1300,
        conditional_rate: 0.65,
        prices: {
          n: 1300,
          mean: 8.6,
          median: 8.4,
          sd: 3.0,
          iqr: [6.2, 11.0] as [number, number],
        },
        win_share: { SOU: 0.42, EVE: 0.3, WAT: 0.28 },
      },
      {
        round_index: 2,
        sales: 120,
        conditional_rate: 0.17,
        prices: {
          n: 120,
          mean: 12.8,
          median: 11.6,
          sd: 2.1,
          iqr: [10.9, 14.4] as [number, number],
        },
        win_share: { SOU: 0.5, EVE: 0.25, WAT: 0.25 },
      },
    ],
    win_share: { SOU: 0.43, EVE: 0.29, WAT: 0.28 },
    price_histogram: {
      edges: [0, 5, 10, 15],
      counts: [200, 900, 320],
      upsilon: 15.0,
    },
  };
}

export function samplePlan() {
  return {
    decision: { s01: true, c01: true, c02: false },
    buys: [
      { player_id: "c01", expected_fee: 8.21, fee_iqr: [5.5, 10.9] as [number, number] },
    ],
    sells: [{ player_id: "s01", expected_fee: 2.0 }],
    breakdown: {
      cost: 6.21,
      risk: 4.4,
      quality: 161.2,
      violations: Array(18).fill(0),
      fitness: 120.5,
      normalized: false,
      feasible: true,
    },
    feasible: true,
    solver_trace: { method: "GA", iterations: 40, evaluations: 1200, rerun_used: false, seed: 0 },
  };
}
