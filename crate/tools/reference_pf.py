"""Full-Newton AC power flow used to freeze reference voltages.

Independent of the Rust sweep: builds Ybus in rectangular form and
iterates on the polar mismatch equations.

    python3 tools/reference_pf.py data/case33bw.m > data/fixtures/case33bw_base_pf.csv
"""
import re
import sys

import numpy as np


def table(text, name):
    body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S).group(1)
    rows = []
    for line in body.splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(t) for t in line.split()])
    return np.array(rows)


def main(path):
    text = open(path).read()
    base_mva = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.]+)", text).group(1))
    bus = table(text, "bus")
    branch = table(text, "branch")
    base_kv = bus[0, 9]
    zbase = base_kv**2 / base_mva
    ids = bus[:, 0].astype(int)
    idx = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    # case33bw stores ohms and kW
    pd = bus[:, 2] / 1e3 / base_mva
    qd = bus[:, 3] / 1e3 / base_mva
    y = np.zeros((n, n), complex)
    for row in branch:
        if row[10] == 0:
            continue
        f, t = idx[int(row[0])], idx[int(row[1])]
        ys = 1.0 / complex(row[2] / zbase, row[3] / zbase)
        y[f, f] += ys
        y[t, t] += ys
        y[f, t] -= ys
        y[t, f] -= ys
    slack = [i for i in range(n) if bus[i, 1] == 3]
    pq = [i for i in range(n) if i not in slack]
    va = np.zeros(n)
    vm = np.ones(n)
    for _ in range(50):
        v = vm * np.exp(1j * va)
        s = v * np.conj(y @ v)
        mis = np.concatenate([(s.real + pd)[pq], (s.imag + qd)[pq]])
        if np.max(np.abs(mis)) < 1e-13:
            break
        dva = np.zeros((n, n), complex)
        dvm = np.zeros((n, n), complex)
        ibus = y @ v
        diag_v = np.diag(v)
        dva = 1j * diag_v @ np.conj(np.diag(ibus) - y @ diag_v)
        dvm = diag_v @ np.conj(y @ np.diag(v / vm)) + np.diag(np.conj(ibus) * v / vm)
        jac = np.block(
            [
                [dva.real[np.ix_(pq, pq)], dvm.real[np.ix_(pq, pq)]],
                [dva.imag[np.ix_(pq, pq)], dvm.imag[np.ix_(pq, pq)]],
            ]
        )
        dx = np.linalg.solve(jac, -mis)
        m = len(pq)
        va[pq] += dx[:m]
        vm[pq] += dx[m:]
    print("bus,vm,va_rad")
    for i in range(n):
        print("%d,%.12f,%.12f" % (ids[i], vm[i], va[i]))


if __name__ == "__main__":
    main(sys.argv[1])
