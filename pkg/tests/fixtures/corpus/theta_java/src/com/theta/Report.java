package com.theta;

import java.util.ArrayList;
import java.util.List;

public class Report {
    private final List<String> lines = new ArrayList<>();
    private int width = 12;

    public void setWidth(int width) {
        this.width = width;
    }

    public void addRow(String label, int value) {
        if (Strings.isBlank(label)) {
            label = "(none)";
        }
        String cell = Strings.padLeft(Integer.toString(value), width);
        lines.add(label + ":" + cell);
    }

    public String render() {
        StringBuilder sb = new StringBuilder();
        for (String line : lines) {
            sb.append(line).append('\n');
        }
        sb.append(Strings.repeat("-", width + 8));
        return sb.toString();
    }
}
