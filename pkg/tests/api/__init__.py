# API测试包