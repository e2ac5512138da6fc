def old_code(items):
    result = []
    for item in items:
        result.append(str(item).upper())
    return result
