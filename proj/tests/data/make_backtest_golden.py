# Hand ledger for the 3-stock backtest scenario, in exact rational arithmetic.
from fractions import Fraction as F

dates = [f"2024-01-{d:02d}" for d in range(1, 11)]
syms = ["AAA", "BBB", "CCC"]
close = {
    "AAA": ["10", "10.5", "10.2", "10.8", "11", "10.6", "10.9", "11.3", "11.1", "11.6"],
    "BBB": ["20", "19.5", "19.8", "20.4", "", "21", "20.5", "20.9", "21.4", "21.2"],
    "CCC": ["5", "5.2", "5.4", "5.1", "5.3", "5.6", "5.5", "5.8", "5.7", "6.0"],
}
tradable = {s: [1] * 10 for s in syms}
tradable["CCC"][3] = 0
tradable["BBB"][4] = 0
scores = {
    "AAA": [0.3, 0.0, 0.0, 0.2, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0],
    "BBB": [0.1, 0.0, 0.0, 0.4, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0],
    "CCC": [0.5, 0.0, 0.0, 0.9, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0],
}
k, every, cost = 2, 3, F(10, 10000)

with open("backtest_panel.csv", "w") as f:
    f.write("date,symbol,open,high,low,close,volume,vwap,tradable\n")
    for d, date in enumerate(dates):
        for s in syms:
            c = close[s][d]
            f.write(f"{date},{s},{c},{c},{c},{c},1000,{c},{tradable[s][d]}\n")
with open("backtest_scores.csv", "w") as f:
    f.write("date,symbol,score\n")
    for d, date in enumerate(dates):
        for s in syms:
            f.write(f"{date},{s},{scores[s][d]}\n")

price = {}
shares = {s: F(0) for s in syms}
cash = F(1)
rows = []
for d in range(10):
    for s in syms:
        if close[s][d]:
            price[s] = F(close[s][d])
    value = cash + sum(shares[s] * price[s] for s in syms)
    turnover = F(0)
    if d % every == 0 and d != 9:
        cand = [s for s in syms if tradable[s][d] and close[s][d]]
        cand.sort(key=lambda s: -scores[s][d])  # stable: symbol order on ties
        cand = cand[:k]
        target = {s: (F(1, len(cand)) if s in cand else F(0)) for s in syms}
        for s in syms:
            turnover += abs(target[s] - shares[s] * price[s] / value)
        value *= 1 - cost * turnover
        cash = F(0)
        shares = {s: value * target[s] / price[s] for s in syms}
    rows.append((dates[d], value, turnover))

with open("backtest_golden.csv", "w") as f:
    f.write("date,value,turnover\n")
    for date, v, t in rows:
        f.write(f"{date},{float(v)!r},{float(t)!r}\n")
