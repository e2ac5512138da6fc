package com.beta;

import com.beta.util.MathUtil;

public class Matrix {
    private final int rows;
    private final int cols;
    private final int[] data;

    public Matrix(int rows, int cols) {
        this.rows = rows;
        this.cols = cols;
        this.data = new int[rows * cols];
    }

    public int get(int r, int c) {
        return data[r * cols + c];
    }

    public void set(int r, int c, int value) {
        data[r * cols + c] = value;
    }

    public Matrix plus(Matrix other) {
        Matrix out = new Matrix(rows, cols);
        for (int i = 0; i < data.length; i++) {
            out.data[i] = MathUtil.add(data[i], other.data[i]);
        }
        return out;
    }

    public double rowMean(int r) {
        int[] row = new int[cols];
        for (int c = 0; c < cols; c++) {
            row[c] = get(r, c);
        }
        return MathUtil.mean(row);
    }

    public void clampAll(int low, int high) {
        for (int i = 0; i < data.length; i++) {
            data[i] = MathUtil.clamp(data[i], low, high);
        }
    }
}
